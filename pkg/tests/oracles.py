"""Independent reference implementations used to cross-check the library.

Nothing in here imports from the solver or second-pass modules: the group
solver is re-derived as a plain FISTA iteration on the unexpanded objective,
and the loading-to-intercept map is rebuilt from dense elimination,
symmetrization and commutation operators constructed by index bookkeeping.
Agreement between these and the library is what the correctness tests assert.
"""

import numpy as np

# ---------------------------------------------------------------------------
# frozen golden records for the K=2, p=1, q=1 design
# ---------------------------------------------------------------------------

# the six groups over the 11 covariates, 1-based, in construction order
GOLDEN_GROUPS_211 = (
    (1, 6, 8),        # constant plus both plain factors (never penalized)
    (2,),             # the lone off-diagonal instrument product
    (3, 7),           # Z^2 with f1*Z
    (3, 9),           # Z^2 with f2*Z
    (4, 5, 10),       # characteristic block with f1*Zi
    (4, 5, 11),       # characteristic block with f2*Zi
)

# every covariate support reachable by unioning penalized groups onto the
# time-invariant block.  Transcribed by hand and kept literal, so the
# enumeration is checked against an independent record instead of against
# its own output.
GOLDEN_MODELS_211 = tuple(frozenset(s) for s in (
    {1, 6, 8},
    {1, 2, 6, 8},
    {1, 3, 6, 7, 8},
    {1, 3, 6, 8, 9},
    {1, 2, 3, 6, 7, 8},
    {1, 2, 3, 6, 8, 9},
    {1, 3, 6, 7, 8, 9},
    {1, 2, 3, 6, 7, 8, 9},
    {1, 4, 5, 6, 8, 10},
    {1, 4, 5, 6, 8, 11},
    {1, 4, 5, 6, 8, 10, 11},
    {1, 2, 4, 5, 6, 8, 10},
    {1, 2, 4, 5, 6, 8, 11},
    {1, 2, 4, 5, 6, 8, 10, 11},
    {1, 3, 4, 5, 6, 7, 8, 10},
    {1, 3, 4, 5, 6, 7, 8, 11},
    {1, 3, 4, 5, 6, 7, 8, 10, 11},
    {1, 2, 3, 4, 5, 6, 7, 8, 10},
    {1, 2, 3, 4, 5, 6, 7, 8, 11},
    {1, 2, 3, 4, 5, 6, 7, 8, 10, 11},
    {1, 3, 4, 5, 6, 8, 9, 10},
    {1, 3, 4, 5, 6, 8, 9, 11},
    {1, 3, 4, 5, 6, 8, 9, 10, 11},
    {1, 2, 3, 4, 5, 6, 8, 9, 10},
    {1, 2, 3, 4, 5, 6, 8, 9, 11},
    {1, 2, 3, 4, 5, 6, 8, 9, 10, 11},
    {1, 3, 4, 5, 6, 7, 8, 9, 10},
    {1, 3, 4, 5, 6, 7, 8, 9, 11},
    {1, 3, 4, 5, 6, 7, 8, 9, 10, 11},
    {1, 2, 3, 4, 5, 6, 7, 8, 9, 10},
    {1, 2, 3, 4, 5, 6, 7, 8, 9, 11},
    {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11},
))


# ---------------------------------------------------------------------------
# reference group solver: accelerated proximal gradient on the raw objective
# ---------------------------------------------------------------------------

def reference_objective(X, y, v, starts, ends, pen2):
    """(1/T)||y - Xv||^2 + sum_g pen2[g] ||v_g||, no caching, no tricks."""
    T = X.shape[0]
    r = y - X @ v
    val = float(r @ r) / T
    for g in range(len(starts)):
        val += pen2[g] * float(np.linalg.norm(v[starts[g]:ends[g]]))
    return val


def reference_kkt(X, y, v, starts, ends, pen2):
    """Max first-order violation at v for the same objective."""
    T = X.shape[0]
    grad = 2.0 / T * (X.T @ (X @ v) - X.T @ y)
    worst = 0.0
    for g in range(len(starts)):
        a, b = starts[g], ends[g]
        vg = v[a:b]
        nrm = np.linalg.norm(vg)
        if nrm > 0:
            worst = max(worst, float(np.max(np.abs(grad[a:b] + pen2[g] * vg / nrm))))
        else:
            worst = max(worst, max(0.0, float(np.linalg.norm(grad[a:b])) - pen2[g]))
    return worst


def reference_group_solver(X, y, starts, ends, pen2, v0=None,
                           max_iter=200_000, kkt_stop=1e-9):
    """FISTA with gradient restarts for the group-penalized least squares.

    pen2[g] is the full per-group penalty factor (2 * delta * weight).
    Returns (v, objective).  Deliberately written against the raw matrices
    so it shares no code path with the production solver.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    T, n = X.shape
    starts = np.asarray(starts)
    ends = np.asarray(ends)
    pen2 = np.asarray(pen2, dtype=float)
    G = X.T @ X
    c = X.T @ y
    L = 2.0 / T * float(np.linalg.eigvalsh(G)[-1])
    if L <= 0:
        return np.zeros(n), reference_objective(X, y, np.zeros(n), starts, ends, pen2)
    eta = 1.0 / L

    def prox(u):
        out = u.copy()
        for g in range(len(starts)):
            a, b = starts[g], ends[g]
            tau = eta * pen2[g]
            if tau == 0.0:
                continue
            nrm = np.linalg.norm(u[a:b])
            out[a:b] = 0.0 if nrm <= tau else (1.0 - tau / nrm) * u[a:b]
        return out

    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    z = v.copy()
    t_mom = 1.0
    for it in range(max_iter):
        grad = 2.0 / T * (G @ z - c)
        v_next = prox(z - eta * grad)
        # gradient-mapping restart keeps the momentum from overshooting
        if (z - v_next) @ (v_next - v) > 0:
            t_mom = 1.0
            z = v_next
        else:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            z = v_next + (t_mom - 1.0) / t_next * (v_next - v)
            t_mom = t_next
        v = v_next
        if it % 50 == 49:
            if reference_kkt(X, y, v, starts, ends, pen2) < kkt_stop:
                break
    return v, reference_objective(X, y, v, starts, ends, pen2)


# ---------------------------------------------------------------------------
# dense operator route for the loading-to-intercept map
# ---------------------------------------------------------------------------

def elimination_matrix(p):
    """Rows pick the lower-triangle entries of a vec'd p x p matrix, column
    by column, diagonal included."""
    picks = [c * p + r for c in range(p) for r in range(c, p)]
    H = np.zeros((len(picks), p * p))
    H[np.arange(len(picks)), picks] = 1.0
    return H


def commutation_via_reshape(m, n):
    """Permutation P with P vec(A) = vec(A') for A of shape (m, n), built by
    tracking where each entry of vec(A) lands after transposition."""
    source = np.arange(m * n).reshape(m, n, order="F").reshape(-1, order="C")
    P = np.zeros((m * n, m * n))
    P[np.arange(m * n), source] = 1.0
    return P


def dense_loading_to_intercept_map(K, p, q, beta2, x1_rows=None):
    """Matrix sending the stacked premia-gap vector to the intercept-side
    coefficients, assembled purely from dense operators.

    beta2: length K*(p+1) + K*q loading coefficients in design order.
    x1_rows: optional 0-based row restriction over the d1 intercept
    coefficients.
    """
    pt = p + 1
    d21 = K * pt
    beta2 = np.asarray(beta2, dtype=float)
    Bt = beta2[:d21].reshape(pt, K, order="F")      # loadings on (1, Z), transposed
    Ct = beta2[d21:].reshape(q, K, order="F")       # loadings on Zi, transposed
    H = elimination_matrix(pt)
    N = 0.5 * (np.eye(pt * pt) + commutation_via_reshape(pt, pt))
    W = commutation_via_reshape(pt, K)              # vec(gap') -> vec(gap)
    top = H @ N @ np.kron(np.eye(pt), Bt) @ W
    bottom = np.kron(np.eye(pt), Ct) @ W
    full = np.vstack([top, bottom])
    if x1_rows is not None:
        full = full[np.asarray(x1_rows, dtype=np.int64), :]
    return full


# ---------------------------------------------------------------------------
# deterministic family of small solver instances
# ---------------------------------------------------------------------------

def random_group_problem(rng, case):
    """Small penalized instance number `case`: cycles design shapes, sample
    sizes and weight patterns, includes a plain singleton-group (lasso)
    variant every fifth case."""
    from premia.design import dimensions
    from premia.groups import build_groups
    from premia.solver import GroupLayout, make_problem

    T = (160, 260, 120)[case % 3]
    if case % 5 == 4:
        d = 25
        layout = GroupLayout.singletons(d)
        w = rng.uniform(0.3, 3.0, size=d)
        X = rng.standard_normal((T, d))
        beta = np.zeros(d)
        nz = rng.choice(d, size=5, replace=False)
        beta[nz] = rng.normal(0.0, 1.5, size=5)
        y = X @ beta + 0.5 * rng.standard_normal(T)
        return make_problem(X, y, layout, w)
    K, p, q = [(2, 1, 1), (2, 2, 2), (3, 2, 3), (4, 3, 2)][case % 4]
    spec = dimensions(K, p, q)
    structure = build_groups(spec)
    layout = GroupLayout.from_structure(structure)
    X = rng.standard_normal((T, spec.d))
    if case % 2:
        w = rng.uniform(0.2, 5.0, size=structure.J)
    else:
        w = np.ones(structure.J)
    w[0] = 0.0
    beta = np.zeros(spec.d)
    beta[0] = rng.normal()
    active = rng.choice(np.arange(1, structure.J),
                        size=min(3, structure.J - 1), replace=False)
    for g in active:
        members = structure.group_members0(int(g))
        beta[members] = rng.normal(0.0, 1.0, size=members.size)
    y = X @ beta + 0.4 * rng.standard_normal(T)
    return make_problem(X, y, layout, w)


# ---------------------------------------------------------------------------
# fabricated per-asset fits (plain OLS, fixed support) for second-pass tests
# ---------------------------------------------------------------------------

def make_ols_fit(asset_id, y, X, spec, support0=None, T_full=None):
    """AssetFit carrying an unpenalized least-squares fit on a fixed support.

    support0: 0-based column positions (defaults to every column).  Used to
    feed the pooled estimators with selection noise removed.
    """
    from premia.firstpass import AssetFit
    from premia.groups import check_no_arbitrage

    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    T = y.size
    sel0 = np.arange(spec.d) if support0 is None else \
        np.array(sorted(support0), dtype=np.int64)
    X_sel = X[:, sel0]
    bsel, *_ = np.linalg.lstsq(X_sel, y, rcond=None)
    beta = np.zeros(spec.d)
    beta[sel0] = bsel
    resid = y - X_sel @ bsel
    support = frozenset(int(j) + 1 for j in sel0)
    return AssetFit(
        asset_id=asset_id, method="aogl", beta_hat=beta, support=support,
        sigma2_hat=float(resid @ resid) / T,
        Qx_hat=(X_sel.T @ X_sel) / T, T_i=int(T),
        tau_iT=float((T_full or T) / T), trimmed=False,
        arbitrage=check_no_arbitrage(support, spec), chosen_delta=0.0,
        sel_idx0=sel0, X_sel=X_sel, resid=resid,
    )

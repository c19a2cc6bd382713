"""Cross-sectional second pass: mispricing vector, asset weights, premia.

The first pass leaves, per asset, selected intercept-side coefficients
(beta1) and factor-side coefficients (beta2).  The tie-in restriction says
beta1 = beta3(beta2) nu for a common vector nu of length K*(p+1), where
beta3 is linear in nu with entries built from the asset's loading
coefficients.  This module estimates nu by pooled OLS, refines it by WLS
with inverse-variance asset weights, fits the conditional factor means by
per-factor adaptive LASSO, and assembles the premia coefficient matrix and
its time path.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .design import ModelSpec, nu_component_names
from .matops import vech, sym, unvec
from .solver import alasso_fit

WEIGHT_CAP = 1e12
S_RIDGE = 1e-12


@dataclass
class SelectionMatrices:
    """0/1 selectors for the four design blocks of one support.

    D (d11 x d11_i) and E (d12 x d12_i) keep columns; B (d21_i x d21) and
    C (d22_i x d22) keep rows.  Transposes restrict full-length blocks to
    the selected coordinates in ascending order.
    """

    D: np.ndarray
    E: np.ndarray
    B: np.ndarray
    C: np.ndarray


def selection_matrices(support, spec):
    """Build block selectors from a 1-based support set."""
    s0 = np.array(sorted(int(j) - 1 for j in support), dtype=np.int64)
    d11, d12, d21, d22 = spec.d11, spec.d12, spec.d21, spec.d22
    d1 = d11 + d12
    quad = s0[s0 < d11]
    char1 = s0[(s0 >= d11) & (s0 < d1)] - d11
    instr2 = s0[(s0 >= d1) & (s0 < d1 + d21)] - d1
    char2 = s0[s0 >= d1 + d21] - d1 - d21
    return SelectionMatrices(
        D=np.eye(d11)[:, quad],
        E=np.eye(d12)[:, char1],
        B=np.eye(d21)[instr2, :],
        C=np.eye(d22)[char2, :],
    )


def _structural_from_beta(spec, beta_hat):
    """Read the loading coefficient matrices out of a dense fit vector."""
    d1, d21 = spec.d1, spec.d21
    beta2 = beta_hat[d1:]
    Bb = beta2[:d21].reshape(spec.p_tilde, spec.K, order="F").T
    C = beta2[d21:].reshape(spec.q, spec.K, order="F").T
    return Bb, C


def intercept_coeff_map(spec, Bb, C, x1_sel0=None):
    """Map nu -> the intercept-side coefficients implied by loadings (Bb, C).

    Column j is the intercept-coefficient vector produced by the j-th unit
    vector of nu: the quadratic block is vech(sym(Bb' G')) and the
    characteristic block vec(C' G') with G' the corresponding elementary
    premia-gap matrix.  Rows are restricted to x1_sel0 (0-based positions
    within the first d1 covariates) when given.
    """
    p_t, K, q = spec.p_tilde, spec.K, spec.q
    ncol = K * p_t
    out = np.zeros((spec.d1, ncol))
    for j in range(ncol):
        Gt = np.zeros((p_t, K))
        Gt[j % p_t, j // p_t] = 1.0     # unvec of the unit vector
        LmF = Gt.T                       # K x p_tilde premia gap
        quad = vech(sym(Bb.T @ LmF))
        char = (C.T @ LmF).reshape(-1, order="F")
        out[:spec.d11, j] = quad
        out[spec.d11:, j] = char
    if x1_sel0 is not None:
        out = out[np.asarray(x1_sel0, dtype=np.int64), :]
    return out


def build_beta3(fit, spec):
    """Selected-row nu-to-beta1 map for one fitted asset (d1_i x K*p_tilde)."""
    Bb, C = _structural_from_beta(spec, fit.beta_hat)
    x1_sel0 = fit.sel_idx0[fit.sel_idx0 < spec.d1]
    return intercept_coeff_map(spec, Bb, C, x1_sel0)


def _beta1_selected(fit, spec):
    sel1 = fit.sel_idx0[fit.sel_idx0 < spec.d1]
    return fit.beta_hat[sel1]


def _raise_unidentified(A, spec, what):
    eigval, eigvec = np.linalg.eigh(A)
    tol = max(1e-10 * max(eigval[-1], 0.0), 1e-300)
    bad = np.flatnonzero(eigval < tol)
    names = nu_component_names(spec)
    flagged = set()
    for b in bad:
        for i in np.flatnonzero(np.abs(eigvec[:, b]) > 1e-8):
            flagged.add(names[i])
    raise np.linalg.LinAlgError(
        f"{what} is singular; unidentified premia-gap components: {sorted(flagged)}"
    )


def estimate_nu_ols(fits, spec):
    """Pooled pilot: OLS of stacked beta1 on stacked beta3 over kept assets."""
    kp = spec.K * spec.p_tilde
    A = np.zeros((kp, kp))
    b = np.zeros(kp)
    n_used = 0
    for fit in fits:
        if not fit.kept:
            continue
        b3 = build_beta3(fit, spec)
        A += b3.T @ b3
        b += b3.T @ _beta1_selected(fit, spec)
        n_used += 1
    if n_used == 0:
        raise ValueError("no kept fits for the pooled pilot")
    if np.linalg.matrix_rank(A) < kp:
        _raise_unidentified(A, spec, "pooled pilot normal matrix")
    return np.linalg.solve(A, b)


def asset_weights(fit, nu1_hat, spec):
    """Inverse-variance weights for one asset's intercept coefficients.

    Returns (vi, wi): vi is the sandwich variance matrix of the restriction
    residual beta1 - beta3 nu and wi = 1/diag(vi), entries capped at 1e12;
    negative diagonal entries (numerical) get weight 0 with a warning.
    Trimmed or skipped assets get all-zero weights.
    """
    d1i = int(np.count_nonzero(fit.sel_idx0 < spec.d1)) if fit.ok else 0
    if not fit.kept or d1i == 0:
        return np.zeros((d1i, d1i)), np.zeros(d1i)
    sel = fit.sel_idx0
    d_h = sel.size
    x1_mask = sel < spec.d1
    # Jacobian of beta3 nu with respect to the selected loading coefficients
    M = np.zeros((d1i, d_h - d1i))
    x1_sel0 = sel[x1_mask]
    col = 0
    for j in sel[~x1_mask]:
        o = int(j) - spec.d1
        Bb = np.zeros((spec.K, spec.p_tilde))
        C = np.zeros((spec.K, spec.q))
        if o < spec.d21:
            Bb[o // spec.p_tilde, o % spec.p_tilde] = 1.0
        else:
            o2 = o - spec.d21
            C[o2 // spec.q, o2 % spec.q] = 1.0
        M[:, col] = intercept_coeff_map(spec, Bb, C, x1_sel0) @ nu1_hat
        col += 1
    # derivative of the restriction residual in the selected coefficients
    Cnu_T = np.hstack([np.eye(d1i), -M])           # d1_i x d_H
    S = (fit.X_sel * (fit.resid ** 2)[:, None]).T @ fit.X_sel / fit.T_i
    tr = np.trace(S)
    S = S + (S_RIDGE * tr / d_h if tr > 0 else 0.0) * np.eye(d_h)
    Qinv_C = np.linalg.solve(fit.Qx_hat, Cnu_T.T)  # d_H x d1_i
    vi = fit.tau_iT * (Qinv_C.T @ S @ Qinv_C)
    dv = np.diag(vi).copy()
    wi = np.empty(d1i)
    for k in range(d1i):
        if dv[k] < 0:
            warnings.warn(
                f"asset {fit.asset_id}: negative variance estimate at "
                f"coefficient {k}; weight set to 0"
            )
            wi[k] = 0.0
        else:
            wi[k] = WEIGHT_CAP if dv[k] == 0 else min(1.0 / dv[k], WEIGHT_CAP)
    return vi, wi


def estimate_nu_wls(fits, weights, spec):
    """Weighted pooled estimator of the premia-gap vector.

    weights: per-fit weight vectors aligned with each fit's selected
    intercept coefficients (zero vectors for trimmed assets).
    """
    kp = spec.K * spec.p_tilde
    A = np.zeros((kp, kp))
    b = np.zeros(kp)
    n = 0
    for fit, wi in zip(fits, weights):
        if not fit.kept or wi.size == 0 or not np.any(wi):
            continue
        b3 = build_beta3(fit, spec)
        Wb3 = b3 * wi[:, None]
        A += b3.T @ Wb3
        b += Wb3.T @ _beta1_selected(fit, spec)
        n += 1
    if n == 0:
        raise ValueError("no positively weighted assets")
    if np.linalg.matrix_rank(A) < kp:
        _raise_unidentified(A, spec, "weighted normal matrix")
    return np.linalg.solve(A, b)


def estimate_F(factors, instruments, gamma=1.0, n_deltas=30):
    """Per-factor adaptive LASSO of the factor on (1, lagged instruments).

    factors: T x K, instruments: T x p with rows already aligned (each row
    holds the conditioning values for the same date's factor row).  Returns
    K x (p+1); column 0 is the unpenalized intercept.  Path tuning charges
    ln(T) per kept coefficient so that spurious instruments drop out as the
    sample grows; the flat AIC charge keeps admitting noise terms at any T.
    """
    F_ts = np.asarray(factors, dtype=float)
    if F_ts.ndim == 1:
        F_ts = F_ts[:, None]
    Z = np.asarray(instruments, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    T, K = F_ts.shape
    p = Z.shape[1]
    if T <= p + 1:
        raise ValueError(f"need T > p+1 rows, got T={T}, p={p}")
    X = np.hstack([np.ones((T, 1)), Z])
    if np.linalg.matrix_rank(X) < p + 1:
        raise ValueError("instrument matrix is rank deficient")
    unpen = np.zeros(p + 1, dtype=bool)
    unpen[0] = True
    F_hat = np.zeros((K, p + 1))
    for k in range(K):
        res = alasso_fit(X, F_ts[:, k], unpenalized_mask=unpen,
                         gamma=gamma, n_deltas=n_deltas,
                         df_penalty=float(np.log(T)))
        F_hat[k] = res.beta
    return F_hat


def risk_premia(nu_hat, F_hat, instruments):
    """Premia coefficient matrix and its path on a lagged instrument series.

    vec of the transposed premia matrix equals nu_hat + vec of the
    transposed factor-mean matrix, by construction.  Returns
    (Lambda_hat, premia path T x K, gap path T x K).
    """
    F_hat = np.asarray(F_hat, dtype=float)
    K, p_t = F_hat.shape
    LmF = unvec(np.asarray(nu_hat, dtype=float), p_t, K).T
    Lambda_hat = F_hat + LmF
    Z = np.asarray(instruments, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    Zt = np.hstack([np.ones((Z.shape[0], 1)), Z])
    lam_path = Zt @ Lambda_hat.T
    gap_path = Zt @ LmF.T
    return Lambda_hat, lam_path, gap_path


@dataclass
class SecondPassResult:
    nu_hat: np.ndarray
    nu1_hat: np.ndarray
    F_hat: np.ndarray
    Lambda_hat: np.ndarray
    weights: dict                 # asset_id -> weight vector
    n_effective: int
    lam_path: np.ndarray = None
    gap_path: np.ndarray = None


def second_pass(fits, factors, instruments, spec, gamma=1.0, n_deltas=30):
    """Full second stage: pilot, weights, WLS, factor means, premia path.

    instruments rows must be the lagged conditioning values aligned with
    the factor rows (and are reused for the emitted premia path).
    """
    fits = list(fits)
    nu1 = estimate_nu_ols(fits, spec)
    weights = []
    wmap = {}
    for fit in fits:
        _, wi = asset_weights(fit, nu1, spec)
        weights.append(wi)
        wmap[fit.asset_id] = wi
    nu = estimate_nu_wls(fits, weights, spec)
    F_hat = estimate_F(factors, instruments, gamma=gamma, n_deltas=n_deltas)
    Lambda_hat, lam_path, gap_path = risk_premia(nu, F_hat, instruments)
    return SecondPassResult(
        nu_hat=nu, nu1_hat=nu1, F_hat=F_hat, Lambda_hat=Lambda_hat,
        weights=wmap, n_effective=sum(1 for f in fits if f.kept),
        lam_path=lam_path, gap_path=gap_path,
    )

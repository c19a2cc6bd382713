"""Transformed-regressor construction for the conditional factor model.

The raw model has returns driven by a time-varying intercept and loadings,
both linear in lagged common instruments Z and asset characteristics Zi.
Absorbing the intercept restriction turns it into a plain linear regression
on d transformed covariates:

  x1 = ( vech[X_t] , Ztilde (x) Zi )   with X_t built from Ztilde = (1, Z'),
  x2 = ( f (x) Ztilde , f (x) Zi )     factor-major scaled factors,

where X_t has squared instruments on the diagonal and twice the cross
products off it.  This module owns the layout (block sizes, index maps,
column names) and the exact map from structural coefficients to the
regression vector beta.
"""

from dataclasses import dataclass, field

import numpy as np

from .matops import vech, sym, vec, vech_index


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions of the regression design.

    K: number of factors (>= 1)
    p: number of common instruments (>= 0)
    q: number of asset characteristics (>= 0)
    """

    K: int
    p: int
    q: int

    def __post_init__(self):
        if self.K < 1:
            raise ValueError(f"need at least one factor, got K={self.K}")
        if self.p < 0 or self.q < 0:
            raise ValueError(f"p and q must be >= 0, got p={self.p}, q={self.q}")

    @property
    def p_tilde(self):
        return self.p + 1

    @property
    def d11(self):
        pt = self.p_tilde
        return (pt + 1) * pt // 2

    @property
    def d12(self):
        return self.p_tilde * self.q

    @property
    def d21(self):
        return self.K * self.p_tilde

    @property
    def d22(self):
        return self.K * self.q

    @property
    def d1(self):
        return self.d11 + self.d12

    @property
    def d2(self):
        return self.d21 + self.d22

    @property
    def d(self):
        return self.d1 + self.d2


def dimensions(K, p, q):
    """Build a ModelSpec; kept as a free function for symmetry with the CLI."""
    return ModelSpec(int(K), int(p), int(q))


@dataclass
class ObservationRow:
    """One panel row: factor realization and lagged conditioning variables.

    When observed is False the return for this row is ignored by every
    estimator (the row only matters for date bookkeeping).
    """

    f: np.ndarray
    Z_prev: np.ndarray
    Zi_prev: np.ndarray
    observed: bool = True


# ---------------------------------------------------------------------------
# index layout helpers (all 0-based; the group module re-exposes 1-based sets)
# ---------------------------------------------------------------------------

def diag_vech_positions(spec):
    """0-based positions of the squared terms Ztilde_j^2 inside the x11 block.

    Position j corresponds to Ztilde_{j+1}: j=0 is the constant, j=l is Z_l^2.
    """
    pt = spec.p_tilde
    return np.array([vech_index(j, j, pt) for j in range(pt)], dtype=np.int64)


def linear_term_position(spec, l):
    """0-based x-index of the linear instrument term 2*Z_l (l in 1..p),
    i.e. the off-diagonal vech entry pairing the constant with Z_l."""
    if not 1 <= l <= spec.p:
        raise ValueError(f"instrument index {l} outside 1..{spec.p}")
    return vech_index(l, 0, spec.p_tilde)


def x1_char_positions(spec, m):
    """0-based x-indices of the characteristic-m intercept block:
    {Zi_m, Z_1*Zi_m, ..., Z_p*Zi_m} inside x12 (m in 1..q)."""
    if not 1 <= m <= spec.q:
        raise ValueError(f"characteristic index {m} outside 1..{spec.q}")
    return np.array(
        [spec.d11 + s * spec.q + (m - 1) for s in range(spec.p_tilde)],
        dtype=np.int64,
    )


def scaled_factor_position(spec, k, s):
    """0-based x-index of f_k * Ztilde_s (k in 1..K, s in 1..p_tilde);
    s=1 is the plain factor f_k."""
    if not (1 <= k <= spec.K and 1 <= s <= spec.p_tilde):
        raise ValueError(f"(k={k}, s={s}) outside 1..{spec.K} x 1..{spec.p_tilde}")
    return spec.d1 + (k - 1) * spec.p_tilde + (s - 1)


def char_factor_position(spec, k, m):
    """0-based x-index of f_k * Zi_m (k in 1..K, m in 1..q)."""
    if not (1 <= k <= spec.K and 1 <= m <= spec.q):
        raise ValueError(f"(k={k}, m={m}) outside 1..{spec.K} x 1..{spec.q}")
    return spec.d1 + spec.d21 + (k - 1) * spec.q + (m - 1)


def ti_indices(spec):
    """0-based indices of the time-invariant block: the constant term plus
    every plain factor f_k."""
    idx = [0] + [scaled_factor_position(spec, k, 1) for k in range(1, spec.K + 1)]
    return np.array(idx, dtype=np.int64)


def coefficient_names(spec):
    """Human-readable names for the d covariates, in design order."""
    pt = spec.p_tilde
    names = []
    # x11: lower-triangle column-major over Ztilde = (1, Z1..Zp)
    def zt(j):
        return "1" if j == 0 else f"Z{j}"

    for c in range(pt):
        for r in range(c, pt):
            if r == c:
                names.append("const" if r == 0 else f"Z{r}^2")
            elif c == 0:
                names.append(f"2*Z{r}")
            else:
                names.append(f"2*Z{c}*Z{r}")
    # x12: Ztilde outer, Zi inner
    for s in range(pt):
        for m in range(1, spec.q + 1):
            names.append(f"Zi{m}" if s == 0 else f"Z{s}*Zi{m}")
    # x21: factor-major over Ztilde
    for k in range(1, spec.K + 1):
        for s in range(pt):
            names.append(f"f{k}" if s == 0 else f"f{k}*{zt(s)}")
    # x22: factor-major over Zi
    for k in range(1, spec.K + 1):
        for m in range(1, spec.q + 1):
            names.append(f"f{k}*Zi{m}")
    assert len(names) == spec.d
    return names


def nu_component_names(spec):
    """Names for the K*p_tilde entries of nu = vec[(Lambda-F)'], i.e. the
    stacked rows of Lambda-F: entry (k-1)*p_tilde + s-1 is factor k's premium
    coefficient on Ztilde_s."""
    names = []
    for k in range(1, spec.K + 1):
        names.append(f"f{k}:const")
        for l in range(1, spec.p + 1):
            names.append(f"f{k}:Z{l}")
    return names


# ---------------------------------------------------------------------------
# regressor construction
# ---------------------------------------------------------------------------

def _check_vec(name, v, n):
    v = np.asarray(v, dtype=float)
    if v.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def build_x1(spec, Z_prev, Zi_prev):
    """Intercept-block regressors for one observation.

    First entry is identically 1; off-diagonal instrument products carry the
    factor 2; the characteristic block is ordered Ztilde outer, Zi inner.
    """
    Z = _check_vec("Z_prev", Z_prev, spec.p)
    Zi = _check_vec("Zi_prev", Zi_prev, spec.q)
    zt = np.concatenate(([1.0], Z))
    X = 2.0 * np.outer(zt, zt)
    np.fill_diagonal(X, zt * zt)
    x11 = vech(X)
    x12 = np.kron(zt, Zi)
    return np.concatenate((x11, x12))


def build_x2(spec, f, Z_prev, Zi_prev):
    """Scaled-factor regressors for one observation, factor-major:
    (f_k, f_k*Z_1, ..., f_k*Z_p) per factor, then (f_k*Zi_1, ...).
    """
    f = _check_vec("f", f, spec.K)
    Z = _check_vec("Z_prev", Z_prev, spec.p)
    Zi = _check_vec("Zi_prev", Zi_prev, spec.q)
    zt = np.concatenate(([1.0], Z))
    return np.concatenate((np.kron(f, zt), np.kron(f, Zi)))


def build_x(spec, f, Z_prev, Zi_prev):
    """Full covariate vector x = (x1', x2')' of length d."""
    return np.concatenate(
        (build_x1(spec, Z_prev, Zi_prev), build_x2(spec, f, Z_prev, Zi_prev))
    )


def build_design(spec, F_ts, Z_ts, Zi_ts):
    """Vectorized design matrix for a whole sample.

    F_ts: (T, K) factor realizations at t
    Z_ts: (T, p) common instruments at t-1 (already lagged by the caller)
    Zi_ts: (T, q) characteristics at t-1

    Returns the (T, d) matrix whose row t is build_x at the corresponding
    inputs.  No standardization happens here.
    """
    F_ts = np.atleast_2d(np.asarray(F_ts, dtype=float))
    Z_ts = np.asarray(Z_ts, dtype=float).reshape(len(F_ts), spec.p)
    Zi_ts = np.asarray(Zi_ts, dtype=float).reshape(len(F_ts), spec.q)
    T = F_ts.shape[0]
    if F_ts.shape[1] != spec.K:
        raise ValueError(f"factor width {F_ts.shape[1]} != K={spec.K}")
    pt = spec.p_tilde
    zt = np.column_stack((np.ones(T), Z_ts))

    cols = np.empty((T, spec.d))
    pos = 0
    for c in range(pt):
        for r in range(c, pt):
            if r == c:
                cols[:, pos] = zt[:, r] * zt[:, r]
            else:
                cols[:, pos] = 2.0 * zt[:, r] * zt[:, c]
            pos += 1
    for s in range(pt):
        for m in range(spec.q):
            cols[:, pos] = zt[:, s] * Zi_ts[:, m]
            pos += 1
    for k in range(spec.K):
        for s in range(pt):
            cols[:, pos] = F_ts[:, k] * zt[:, s]
            pos += 1
    for k in range(spec.K):
        for m in range(spec.q):
            cols[:, pos] = F_ts[:, k] * Zi_ts[:, m]
            pos += 1
    assert pos == spec.d
    return cols


# ---------------------------------------------------------------------------
# structural coefficients -> regression coefficients
# ---------------------------------------------------------------------------

@dataclass
class StructuralCoefficients:
    """Per-asset structural parameters plus the shared premium matrices.

    B_breve is the K x p_tilde matrix [A | B] stacking the constant loading A
    with the instrument sensitivities B; C is K x q; Lambda and F are the
    K x p_tilde premium / factor-expectation matrices (first column is the
    constant part).
    """

    B_breve: np.ndarray
    C: np.ndarray
    Lambda: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        self.B_breve = np.atleast_2d(np.asarray(self.B_breve, dtype=float))
        self.C = np.asarray(self.C, dtype=float).reshape(self.B_breve.shape[0], -1)
        self.Lambda = np.atleast_2d(np.asarray(self.Lambda, dtype=float))
        self.F = np.atleast_2d(np.asarray(self.F, dtype=float))


def true_beta(spec, B_breve, C, Lambda_minus_F):
    """Exact regression coefficient vector implied by the structural model.

    The intercept blocks come from the no-arbitrage restriction (intercept =
    loadings' premium exposure):

      beta11 = vech( sym( B_breve' (Lambda-F) ) )
      beta12 = vec( C' (Lambda-F) )          (Ztilde-outer ordering)
      beta2  = ( vec[B_breve']', vec[C']' )'

    The symmetrization halves the off-diagonal products exactly because the
    corresponding regressors carry the factor 2.
    """
    Bb = np.asarray(B_breve, dtype=float).reshape(spec.K, spec.p_tilde)
    C = np.asarray(C, dtype=float).reshape(spec.K, spec.q)
    G = np.asarray(Lambda_minus_F, dtype=float).reshape(spec.K, spec.p_tilde)
    beta11 = vech(sym(Bb.T @ G))
    beta12 = vec(C.T @ G)
    beta21 = vec(Bb.T)
    beta22 = vec(C.T)
    return np.concatenate((beta11, beta12, beta21, beta22))


def beta2_to_structural(spec, beta2):
    """Read (B_breve, C) back from the loading-block coefficients."""
    beta2 = np.asarray(beta2, dtype=float)
    if beta2.size != spec.d2:
        raise ValueError(f"beta2 has length {beta2.size}, expected {spec.d2}")
    Bb = beta2[: spec.d21].reshape(spec.p_tilde, spec.K, order="F").T
    C = beta2[spec.d21 :].reshape(spec.q, spec.K, order="F").T
    return Bb, C

"""Per-asset time-series regressions: penalized fits, trimming, classification.

Each asset is fit independently on its observed rows.  Three methods share
one interface: the overlap-group estimator whose groups enforce the
no-arbitrage tie-ins ("aogl"), a plain adaptive LASSO over the same columns
with only the time-invariant block unpenalized ("alasso"), and the
time-invariant OLS baseline ("ti").
"""

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .design import ModelSpec, ti_indices
from .groups import GroupStructure, check_no_arbitrage, ArbitrageVerdict
from .solver import (
    GroupLayout,
    make_problem,
    ridge_init,
    adaptive_weights,
    fit_path_aic,
    alasso_fit,
)

METHODS = ("aogl", "alasso", "ti")

DEFAULT_CHI1 = 15.0
DEFAULT_CHI2 = 678.0 / 60.0


@dataclass
class TuningConfig:
    """Shared knobs for the first-pass estimators."""

    gamma: float = 1.0
    n_deltas: int = 30
    weight_cap: float = 1e12
    ridge_level: float = None
    max_sweeps: int = 50_000
    group_df: bool = False
    chi1: float = DEFAULT_CHI1
    chi2: float = DEFAULT_CHI2
    trim_on_full_design: bool = False


@dataclass
class AssetFit:
    """Result of one per-asset time-series regression.

    support holds 1-based covariate positions; beta_hat is dense length d
    with zeros off the support.  Qx_hat is the observed-sample Gram on the
    selected columns (ascending original order), the matrix the trimming
    rule conditions on and the second pass inverts.
    """

    asset_id: object
    method: str
    beta_hat: np.ndarray
    support: frozenset
    sigma2_hat: float
    Qx_hat: np.ndarray
    T_i: int
    tau_iT: float
    trimmed: bool
    arbitrage: ArbitrageVerdict
    chosen_delta: float
    sel_idx0: np.ndarray = None          # 0-based selected columns, ascending
    X_sel: np.ndarray = None             # observed rows x selected columns
    resid: np.ndarray = None             # residuals on observed rows
    skip_reason: str = None
    seconds: float = 0.0

    @property
    def ok(self):
        return self.skip_reason is None

    @property
    def kept(self):
        return self.ok and not self.trimmed

    @classmethod
    def skipped(cls, asset_id, method, d, reason):
        return cls(
            asset_id=asset_id, method=method,
            beta_hat=np.zeros(d), support=frozenset(),
            sigma2_hat=np.nan, Qx_hat=None, T_i=0, tau_iT=np.inf,
            trimmed=True, arbitrage=None, chosen_delta=np.nan,
            skip_reason=reason,
        )


def trimming(Qx_hat, tau_iT, chi1=DEFAULT_CHI1, chi2=DEFAULT_CHI2):
    """Keep an asset iff its Gram is well conditioned and its sample long.

    The condition number is sqrt(eig_max/eig_min); nonpositive smallest
    eigenvalue fails the check outright.
    """
    eigs = np.linalg.eigvalsh(Qx_hat)
    lo, hi = eigs[0], eigs[-1]
    if lo <= 0:
        return False
    cn = np.sqrt(hi / lo)
    return bool(cn <= chi1 and tau_iT <= chi2)


def condition_number(Qx_hat):
    eigs = np.linalg.eigvalsh(Qx_hat)
    if eigs[0] <= 0:
        return np.inf
    return float(np.sqrt(eigs[-1] / eigs[0]))


def fit_asset(asset_id, returns, observed, design, spec, structure,
              method="aogl", config=None, T_full=None):
    """Fit one asset on its observed rows with the requested method.

    returns/observed are full-length series; design is the full T x d
    covariate matrix for this asset.  T_full (defaults to len(returns))
    enters tau_iT = T/T_i for the trimming rule.
    """
    if config is None:
        config = TuningConfig()
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    t0 = time.time()
    returns = np.asarray(returns, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    X = np.asarray(design, dtype=float)
    d = spec.d
    if T_full is None:
        T_full = returns.size
    obs = np.flatnonzero(observed)
    T_i = obs.size
    if T_i < spec.K + 2:
        return AssetFit.skipped(asset_id, method, d,
                                f"insufficient observations: T_i={T_i} < K+2={spec.K + 2}")
    y = returns[obs]
    Xo = X[obs]
    ti0 = ti_indices(spec)
    Xti = Xo[:, ti0]
    if np.linalg.matrix_rank(Xti) < len(ti0):
        return AssetFit.skipped(asset_id, method, d, "rank-deficient time-invariant block")

    chosen_delta = 0.0
    if method == "ti":
        bti, *_ = np.linalg.lstsq(Xti, y, rcond=None)
        beta = np.zeros(d)
        beta[ti0] = bti
    elif method == "alasso":
        unpen = np.zeros(d, dtype=bool)
        unpen[ti0] = True
        res = alasso_fit(Xo, y, unpenalized_mask=unpen, gamma=config.gamma,
                         n_deltas=config.n_deltas, weight_cap=config.weight_cap,
                         ridge_level=config.ridge_level, max_sweeps=config.max_sweeps)
        beta = res.beta
        chosen_delta = res.chosen_delta
    else:
        layout = GroupLayout.from_structure(structure)
        # unit weights on penalized groups so column scaling applies to them;
        # the adaptive weights below replace the values without changing
        # which groups are scaled
        w1 = np.ones(structure.J)
        w1[0] = 0.0
        problem = make_problem(Xo, y, layout, w1)
        v0 = ridge_init(problem, config.ridge_level)
        w = adaptive_weights(v0, layout, gamma=config.gamma,
                             weight_cap=config.weight_cap, unpenalized=(0,))
        problem.group_weights = w
        res = fit_path_aic(problem, n_deltas=config.n_deltas,
                           max_sweeps=config.max_sweeps, group_df=config.group_df)
        beta = res.solution.beta
        chosen_delta = res.chosen_delta

    sel0 = np.flatnonzero(beta)
    support = frozenset(int(j) + 1 for j in sel0)
    X_sel = Xo[:, sel0]
    resid = y - X_sel @ beta[sel0]
    sigma2 = float(resid @ resid) / T_i
    Qx = (X_sel.T @ X_sel) / T_i
    tau = T_full / T_i
    if config.trim_on_full_design:
        Q_for_trim = (Xo.T @ Xo) / T_i
    else:
        Q_for_trim = Qx
    keep = trimming(Q_for_trim, tau, config.chi1, config.chi2) if sel0.size else False
    verdict = check_no_arbitrage(support, spec)
    if method == "aogl":
        # the grouping makes violations structurally impossible
        assert bool(verdict), f"group-selected support violates tie-ins: {verdict.violations}"
    return AssetFit(
        asset_id=asset_id, method=method, beta_hat=beta, support=support,
        sigma2_hat=sigma2, Qx_hat=Qx, T_i=int(T_i), tau_iT=float(tau),
        trimmed=not keep, arbitrage=verdict, chosen_delta=float(chosen_delta),
        sel_idx0=sel0, X_sel=X_sel, resid=resid,
        seconds=time.time() - t0,
    )


@dataclass
class CrossSectionSummary:
    n_assets: int
    n_kept: int
    n_trimmed: int
    n_skipped: int
    ti_pct: float
    arb_pct: float
    av_nbreg: float
    instrument_freq: dict    # bucket label -> array length p (selection shares)
    characteristic_freq: dict
    bucket_counts: dict


def classify_cross_section(fits, spec, bucket_edges=None):
    """Aggregate per-asset fits into cross-sectional selection statistics.

    ti_pct: share of kept fits whose support is exactly the time-invariant
    block.  arb_pct: share of the remaining (time-varying) kept fits whose
    support fails the no-arbitrage check.  av_nbreg: mean support size.
    Selection frequencies count, per instrument/characteristic, the kept
    fits selecting any of its scaled-factor columns, within sample-size
    buckets on T_i (bucket_edges are right-open cut points).
    """
    fits = list(fits)
    if not fits:
        raise ValueError("no fits to classify")
    kept = [f for f in fits if f.kept]
    n_skipped = sum(1 for f in fits if not f.ok)
    n_trimmed = sum(1 for f in fits if f.ok and f.trimmed)
    if not kept:
        raise ValueError("all fits trimmed or skipped")
    ti_set = frozenset(int(j) + 1 for j in ti_indices(spec))
    is_ti = np.array([f.support == ti_set for f in kept])
    tv = [f for f, flag in zip(kept, is_ti) if not flag]
    n_arb = sum(1 for f in tv if not bool(f.arbitrage))
    nbreg = np.array([len(f.support) for f in kept], dtype=float)

    from .design import scaled_factor_position, char_factor_position
    p, q, K = spec.p, spec.q, spec.K
    if bucket_edges is None:
        edges = []
    else:
        edges = sorted(bucket_edges)
    cuts = [-np.inf] + list(edges) + [np.inf]
    labels = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if a == -np.inf and b == np.inf:
            labels.append("all")
        elif a == -np.inf:
            labels.append(f"<{b:g}")
        elif b == np.inf:
            labels.append(f">={a:g}")
        else:
            labels.append(f"[{a:g},{b:g})")
    inst_freq = {}
    char_freq = {}
    bucket_counts = {}
    for lab, a, b in zip(labels, cuts[:-1], cuts[1:]):
        grp = [f for f in kept if a <= f.T_i < b]
        bucket_counts[lab] = len(grp)
        fi = np.zeros(p)
        fc = np.zeros(q)
        for f in grp:
            for l in range(1, p + 1):
                # scaled-factor slots for instrument l sit at offset l+1 (1 = const)
                if any(scaled_factor_position(spec, k, l + 1) + 1 in f.support
                       for k in range(1, K + 1)):
                    fi[l - 1] += 1
            for m in range(1, q + 1):
                if any(char_factor_position(spec, k, m) + 1 in f.support
                       for k in range(1, K + 1)):
                    fc[m - 1] += 1
        if grp:
            fi /= len(grp)
            fc /= len(grp)
        inst_freq[lab] = fi
        char_freq[lab] = fc
    return CrossSectionSummary(
        n_assets=len(fits),
        n_kept=len(kept),
        n_trimmed=n_trimmed,
        n_skipped=n_skipped,
        ti_pct=100.0 * float(np.mean(is_ti)),
        arb_pct=100.0 * n_arb / len(tv) if tv else 0.0,
        av_nbreg=float(np.mean(nbreg)),
        instrument_freq=inst_freq,
        characteristic_freq=char_freq,
        bucket_counts=bucket_counts,
    )

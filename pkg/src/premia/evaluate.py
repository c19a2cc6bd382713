"""Loading paths, return predictions, portfolio prediction errors, metrics.

Four prediction routes share one entry point: the group-penalized fit
predicts through the premia path (its intercept path is b'gap by
construction), the plain adaptive-LASSO fit reads its intercept path off
the estimated intercept-side coefficients, the time-invariant baseline
uses constant loadings with the factor sample mean, and the hybrid route
combines time-invariant loadings with the time-varying factor means.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .design import build_x1

AOGL, ALASSO, TI, HYBRID = "aogl", "alasso", "ti", "hybrid"
PREDICT_METHODS = (AOGL, ALASSO, TI, HYBRID)


def loadings_path(fit, spec, Z, Zi):
    """Per-date factor loadings b_t = A + B Z_{t-1} + C Zi_{t-1}, (T, K).

    Z: (T, p) lagged common instruments; Zi: (T, q) lagged characteristics
    of this asset.  Rows with missing values yield NaN loadings.
    """
    from .secondpass import _structural_from_beta
    Bb, C = _structural_from_beta(spec, fit.beta_hat)
    Z = np.asarray(Z, dtype=float).reshape(len(Z), -1)
    Zi = np.asarray(Zi, dtype=float).reshape(len(Zi), -1)
    Zt = np.hstack([np.ones((Z.shape[0], 1)), Z])
    return Zt @ Bb.T + Zi @ C.T


def intercept_path_from_x1(fit, spec, Z, Zi):
    """Intercept path read directly off the estimated intercept-side
    coefficients (may violate the tie-in restriction; used for the plain
    LASSO route)."""
    T = len(Z)
    beta1 = fit.beta_hat[:spec.d1]
    out = np.empty(T)
    for t in range(T):
        out[t] = build_x1(spec, Z[t], Zi[t]) @ beta1
    return out


def predict_asset(fit, spec, Z, Zi, method, lam_path=None, gap_path=None,
                  fmean_path=None, f_bar=None):
    """Return (r_hat, a_hat, b_ef) per date for one asset.

    lam_path/gap_path: premia and premia-gap paths (T, K) from the second
    pass; fmean_path: conditional factor means (T, K); f_bar: unconditional
    factor mean (K,).  Only the inputs the method needs are required.
    """
    if method not in PREDICT_METHODS:
        raise ValueError(f"unknown prediction method {method!r}")
    b = loadings_path(fit, spec, Z, Zi)
    if method == AOGL:
        if lam_path is None or gap_path is None:
            raise ValueError("premia paths required")
        a_hat = np.sum(b * gap_path, axis=1)
        r_hat = np.sum(b * lam_path, axis=1)
        b_ef = r_hat - a_hat
    elif method == ALASSO:
        if fmean_path is None:
            raise ValueError("factor-mean path required")
        a_hat = intercept_path_from_x1(fit, spec, Z, Zi)
        b_ef = np.sum(b * fmean_path, axis=1)
        r_hat = a_hat + b_ef
    elif method == TI:
        if f_bar is None:
            raise ValueError("factor sample mean required")
        a_hat = np.full(len(Z), fit.beta_hat[0])
        b_ef = b @ np.asarray(f_bar, dtype=float)
        r_hat = a_hat + b_ef
    else:  # hybrid: constant loadings, time-varying factor means
        if fmean_path is None:
            raise ValueError("factor-mean path required")
        a_hat = np.full(len(Z), fit.beta_hat[0])
        b_ef = np.sum(b * fmean_path, axis=1)
        r_hat = a_hat + b_ef
    return r_hat, a_hat, b_ef


def predict_returns(fits, spec, Z, Zi_list, method, lam_path=None,
                    gap_path=None, fmean_path=None, f_bar=None,
                    observed_list=None):
    """Per-asset prediction matrix (n, T) with NaN for excluded entries.

    Trimmed or skipped fits are excluded entirely.  Returns the matrix and
    the cross-sectional decomposition series (mean intercept path, mean
    exposure-times-factor-mean path) over included assets per date.
    """
    n = len(fits)
    T = len(Z)
    R = np.full((n, T), np.nan)
    A = np.full((n, T), np.nan)
    BEF = np.full((n, T), np.nan)
    for i, fit in enumerate(fits):
        if not fit.kept:
            continue
        r, a, bef = predict_asset(fit, spec, Z, Zi_list[i], method,
                                  lam_path, gap_path, fmean_path, f_bar)
        if observed_list is not None:
            mask = ~np.asarray(observed_list[i], dtype=bool)
            r = r.copy(); a = a.copy(); bef = bef.copy()
            r[mask] = np.nan; a[mask] = np.nan; bef[mask] = np.nan
        R[i] = r
        A[i] = a
        BEF[i] = bef
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        # all-NaN dates legitimately average to NaN
        warnings.simplefilter("ignore", category=RuntimeWarning)
        mean_a = np.nanmean(A, axis=0) if np.any(~np.isnan(A)) else np.full(T, np.nan)
        mean_bef = np.nanmean(BEF, axis=0) if np.any(~np.isnan(BEF)) else np.full(T, np.nan)
    return R, mean_a, mean_bef


@dataclass
class PESeries:
    pe: np.ndarray          # portfolio prediction errors per evaluation date
    target: np.ndarray      # realized portfolio target per date
    predicted: np.ndarray   # predicted portfolio return per date
    n_assets: np.ndarray    # contributing assets per date
    truncated: np.ndarray   # True where the forward window was cut short
    valid: np.ndarray       # date mask into the original index


def portfolio_pe(predictions, realized, horizon=12):
    """Equally weighted portfolio prediction errors.

    predictions/realized: (n, T) with NaN marking unavailable entries.
    For each date t the target is the cross-sectional mean of each asset's
    average realized return over the next `horizon` months (the same date's
    return when horizon=0); the error is target minus the cross-sectional
    mean prediction.  End-of-sample windows shorter than the horizon use
    the available months and are flagged.
    """
    P = np.asarray(predictions, dtype=float)
    R = np.asarray(realized, dtype=float)
    if P.shape != R.shape:
        raise ValueError("prediction and realized panels must share shape")
    n, T = P.shape
    pe, tgt, pred, cnt, trunc, valid = [], [], [], [], [], []
    for t in range(T):
        if horizon == 0:
            fwd = R[:, t]
            short = False
        else:
            lo, hi = t + 1, min(t + horizon, T - 1)
            if lo > T - 1:
                continue
            window = R[:, lo:hi + 1]
            with np.errstate(invalid="ignore"), warnings.catch_warnings():
                warnings.simplefilter("ignore", category=RuntimeWarning)
                fwd = np.nanmean(window, axis=1)
            short = (hi - lo + 1) < horizon
        use = ~np.isnan(P[:, t]) & ~np.isnan(fwd)
        if not np.any(use):
            continue
        pe.append(float(np.mean(fwd[use]) - np.mean(P[use, t])))
        tgt.append(float(np.mean(fwd[use])))
        pred.append(float(np.mean(P[use, t])))
        cnt.append(int(np.sum(use)))
        trunc.append(bool(short))
        valid.append(t)
    if not pe:
        raise ValueError("no date with overlapping predictions and realizations")
    return PESeries(
        pe=np.array(pe), target=np.array(tgt), predicted=np.array(pred),
        n_assets=np.array(cnt), truncated=np.array(trunc, dtype=bool),
        valid=np.array(valid, dtype=np.int64),
    )


@dataclass
class PredictionReport:
    pe: np.ndarray
    rmspe: float
    av_abs_pe: float
    std_abs_pe: float
    mape: float
    r2_overall: float
    r2_by_year: dict
    mean_a_hat: np.ndarray = None
    mean_b_ef: np.ndarray = None
    truncated: np.ndarray = None


def metrics(pe, target, years=None, mean_benchmark=False):
    """Summary metrics of a portfolio prediction-error series.

    The out-of-sample R-squared compares squared errors against the squared
    realized targets (benchmark zero, the convention for return prediction);
    mean_benchmark=True subtracts the within-period target mean instead.
    Year labels, when given, add one R-squared per calendar year.
    """
    pe = np.asarray(pe, dtype=float)
    target = np.asarray(target, dtype=float)
    if pe.size == 0:
        raise ValueError("empty prediction-error series")
    abs_pe = np.abs(pe)
    rmspe = float(np.sqrt(np.mean(pe ** 2)))
    av_abs = float(np.mean(abs_pe))
    std_abs = float(np.std(abs_pe, ddof=1)) if pe.size > 1 else float("nan")

    def _r2(mask):
        t = target[mask]
        e = pe[mask]
        bench = np.mean(t) if mean_benchmark else 0.0
        denom = np.sum((t - bench) ** 2)
        if denom == 0:
            return float("nan")
        return float(1.0 - np.sum(e ** 2) / denom)

    r2_by_year = {}
    if years is not None:
        years = np.asarray(years)
        for yr in np.unique(years):
            r2_by_year[int(yr)] = _r2(years == yr)
    return PredictionReport(
        pe=pe, rmspe=rmspe, av_abs_pe=av_abs, std_abs_pe=std_abs,
        mape=av_abs, r2_overall=_r2(np.ones(pe.size, dtype=bool)),
        r2_by_year=r2_by_year,
    )

"""End-to-end run orchestration: load, fit per asset, pool, predict, report.

Artifacts are written under the configured output directory and are
deterministic: identical config and data produce byte-identical files (no
timestamps or timing fields in anything serialized).
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .design import ModelSpec, build_design
from .groups import build_groups
from .firstpass import (TuningConfig, fit_asset, classify_cross_section,
                        DEFAULT_CHI1, DEFAULT_CHI2)
from .secondpass import second_pass, estimate_F
from .evaluate import predict_returns, portfolio_pe, metrics, PREDICT_METHODS
from .panel import (PanelData, PanelError, PreprocessOptions, load_panel,
                    preprocess, asset_matrices, parse_month)

__all__ = ["RunConfig", "ArtifactBundle", "run_pipeline", "config_hash"]

STAGES = ("fit", "pool", "predict", "evaluate")


@dataclass
class RunConfig:
    """Everything one run needs; serializable to/from plain dicts."""

    K: int
    p: int
    q: int
    paths: dict = field(default_factory=dict)
    bindings: dict = None
    methods: tuple = ("aogl",)
    tuning: TuningConfig = field(default_factory=TuningConfig)
    train_end: str = None        # ISO month; None fits on the full sample
    rank_characteristics: bool = True
    standardize_instruments: bool = True
    horizon: int = 12
    min_obs: int = None          # default K + 2
    seed: int = 0
    threads: int = 1
    out_dir: str = "premia_run"

    def __post_init__(self):
        if isinstance(self.methods, str):
            self.methods = (self.methods,)
        self.methods = tuple(self.methods)
        if isinstance(self.tuning, dict):
            self.tuning = TuningConfig(**self.tuning)

    @property
    def spec(self):
        return ModelSpec(self.K, self.p, self.q)

    def validate(self):
        for name in ("K", "p", "q"):
            if int(getattr(self, name)) < 1:
                raise PanelError(f"{name} must be a positive integer")
        if not self.methods:
            raise PanelError("no methods requested")
        bad = [m for m in self.methods if m not in PREDICT_METHODS]
        if bad:
            raise PanelError(f"unknown methods {bad}; "
                             f"expected subset of {sorted(PREDICT_METHODS)}")
        if not (self.tuning.chi1 > 1):
            raise PanelError("chi1 must be > 1")
        if not (self.tuning.chi2 >= 1):
            raise PanelError("chi2 must be >= 1")
        if self.horizon < 0:
            raise PanelError("horizon must be >= 0")
        if self.threads < 1:
            raise PanelError("threads must be >= 1")
        return self

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out


def config_hash(config):
    """Stable content hash of a run configuration."""
    payload = json.dumps(config.to_dict(), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class ArtifactBundle:
    config: RunConfig
    panel: PanelData
    fits: dict            # method -> list of AssetFit in asset order
    pooled: dict          # method -> SecondPassResult or None
    predictions: dict     # method -> (n, T) array
    reports: dict         # method -> PredictionReport
    summaries: dict       # method -> CrossSectionSummary
    files: dict           # artifact name -> path
    manifest: dict


def _fit_one(args):
    (asset, arrays, spec, structure, method, tuning, T_full) = args
    returns, observed, F, Z, Zi = arrays
    design = build_design(spec, F, Z, Zi)
    return fit_asset(asset, returns, observed, design, spec, structure,
                     method=method, config=tuning, T_full=T_full)


def _fit_all(panel, config, train, progress=None):
    """Per-asset fits for every method, merged back in asset order."""
    spec = config.spec
    structure = build_groups(spec)
    T_full = int(train.sum())
    jobs = []
    for method in config.methods:
        # hybrid predicts from the group-selected loadings
        fit_method = "aogl" if method == "hybrid" else method
        for i, asset in enumerate(panel.assets):
            returns, observed, F, Z, Zi = asset_matrices(panel, i)
            arrays = (returns[train], observed[train],
                      F[train], Z[train], Zi[train])
            jobs.append((asset, arrays, spec, structure, fit_method,
                         config.tuning, T_full))
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_fit_one, jobs))
    else:
        results = [_fit_one(j) for j in jobs]
    fits = {}
    k = 0
    for method in config.methods:
        fits[method] = results[k:k + panel.n_assets]
        k += panel.n_assets
        if progress:
            progress(f"stage=fit method={method} assets={panel.n_assets}")
    return fits


def _predict_method(method, fits, spec, panel, pooled, F_hat, f_bar):
    Z = panel.instruments
    Zi_list = [panel.characteristics[i] for i in range(panel.n_assets)]
    obs_list = [panel.observed[i] for i in range(panel.n_assets)]
    kwargs = {}
    if method == "aogl":
        if pooled is None:
            raise PanelError("aogl prediction needs the pooled second pass")
        kwargs = {"lam_path": pooled.lam_path, "gap_path": pooled.gap_path}
    elif method in ("alasso", "hybrid"):
        Zt = np.column_stack([np.ones(panel.T), Z])
        kwargs = {"fmean_path": Zt @ F_hat.T}
    elif method == "ti":
        kwargs = {"f_bar": f_bar}
    pred, mean_a, mean_bef = predict_returns(
        fits, spec, Z, Zi_list, method, observed_list=obs_list, **kwargs)
    return pred, mean_a, mean_bef


def _write_fits_jsonl(path, fits):
    from .firstpass import condition_number

    with open(path, "w") as fh:
        for f in fits:
            cn = (condition_number(f.Qx_hat)
                  if f.ok and f.Qx_hat is not None else None)
            rec = {
                "asset_id": str(f.asset_id),
                "method": f.method,
                "status": ("kept" if f.kept
                           else "trimmed" if f.ok else "skipped"),
                "T_i": int(f.T_i),
                "support": sorted(int(j) for j in f.support) if f.ok else [],
                "beta": ({str(j): float(f.beta_hat[j - 1])
                          for j in sorted(f.support)} if f.ok else {}),
                "condition_number": None if cn is None else float(cn),
                "tau": (None if not np.isfinite(f.tau_iT)
                        else float(f.tau_iT)),
                "arbitrage_ok": (bool(f.arbitrage) if f.ok and
                                 f.arbitrage is not None else None),
                "chosen_delta": (None if f.chosen_delta is None
                                 or not np.isfinite(f.chosen_delta)
                                 else float(f.chosen_delta)),
                "skip_reason": f.skip_reason,
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                x if isinstance(x, str) else f"{x:.17g}" for x in row) + "\n")


def _write_second_pass(path, res, spec):
    payload = {
        "nu_hat": [float(x) for x in res.nu_hat],
        "nu1_hat": [float(x) for x in res.nu1_hat],
        "F_hat": [[float(x) for x in row] for row in res.F_hat],
        "Lambda_hat": [[float(x) for x in row] for row in res.Lambda_hat],
        "n_effective": int(res.n_effective),
        "K": spec.K,
        "p": spec.p,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)


def _write_summary(path, summary):
    rows = [
        ("n_assets", summary.n_assets), ("n_kept", summary.n_kept),
        ("n_trimmed", summary.n_trimmed), ("n_skipped", summary.n_skipped),
        ("ti_pct", summary.ti_pct), ("arb_pct", summary.arb_pct),
        ("av_nbreg", summary.av_nbreg),
    ]
    with open(path, "w") as fh:
        fh.write("statistic,value\n")
        for k, v in rows:
            fh.write(f"{k},{v:.17g}\n" if not isinstance(v, int)
                     else f"{k},{v}\n")
        for label, freq in summary.instrument_freq.items():
            fh.write("instrument_freq[%s],%s\n"
                     % (label, ";".join(f"{x:.17g}" for x in freq)))
        for label, freq in summary.characteristic_freq.items():
            fh.write("characteristic_freq[%s],%s\n"
                     % (label, ";".join(f"{x:.17g}" for x in freq)))


def run_pipeline(config, panel=None, stages=STAGES, progress=None):
    """Run the requested stages and write artifacts.

    panel may be passed pre-loaded (the simulation bridge does this);
    otherwise it is read from config.paths.  Stages later in the chain
    require the earlier ones.  Returns an ArtifactBundle.
    """
    config.validate()
    spec = config.spec
    if panel is None:
        min_obs = config.min_obs if config.min_obs is not None else spec.K + 2
        panel = load_panel(config.paths, config.bindings, min_obs=min_obs)
        panel = preprocess(panel, PreprocessOptions(
            rank_characteristics=config.rank_characteristics,
            standardize_instruments=config.standardize_instruments,
            train_end=config.train_end,
        ))
    if panel.factors.shape[1] != spec.K:
        raise PanelError(f"config says K={spec.K} but factors file has "
                         f"{panel.factors.shape[1]} columns")
    if panel.instruments.shape[1] != spec.p:
        raise PanelError(f"config says p={spec.p} but instruments file has "
                         f"{panel.instruments.shape[1]} columns")
    if panel.characteristics.shape[2] != spec.q:
        raise PanelError(f"config says q={spec.q} but characteristics file "
                         f"has {panel.characteristics.shape[2]} columns")

    if config.train_end is None:
        train = np.ones(panel.T, dtype=bool)
    else:
        train = panel.train_mask(config.train_end)
    test = ~train

    os.makedirs(config.out_dir, exist_ok=True)
    files = {}
    bundle = ArtifactBundle(config=config, panel=panel, fits={}, pooled={},
                            predictions={}, reports={}, summaries={},
                            files=files, manifest={})

    if "fit" in stages:
        bundle.fits = _fit_all(panel, config, train, progress=progress)
        for method, fits in bundle.fits.items():
            path = os.path.join(config.out_dir, f"fits_{method}.jsonl")
            _write_fits_jsonl(path, fits)
            files[f"fits_{method}"] = path
            try:
                bundle.summaries[method] = classify_cross_section(fits, spec)
            except ValueError:
                bundle.summaries[method] = None
            if bundle.summaries[method] is not None:
                spath = os.path.join(config.out_dir,
                                     f"selection_summary_{method}.csv")
                _write_summary(spath, bundle.summaries[method])
                files[f"selection_summary_{method}"] = spath

    # the pooled stage starts only after every per-asset fit has finished
    F_hat = {}
    f_bar = panel.factors[train].mean(axis=0)
    if "pool" in stages:
        if not bundle.fits:
            raise PanelError("pool stage requires the fit stage")
        for method, fits in bundle.fits.items():
            if method == "aogl":
                kept = [f for f in fits if f.kept]
                try:
                    res = second_pass(kept, panel.factors[train],
                                      panel.instruments[train], spec,
                                      gamma=config.tuning.gamma,
                                      n_deltas=config.tuning.n_deltas)
                except Exception as exc:
                    raise PanelError(
                        f"pooled stage failed for method={method} with "
                        f"{len(kept)} kept assets: {exc}"
                    ) from exc
                # extend the premia paths to the full timeline for prediction
                from .secondpass import risk_premia
                _, lam_path, gap_path = risk_premia(
                    res.nu_hat, res.F_hat, panel.instruments)
                res.lam_path, res.gap_path = lam_path, gap_path
                bundle.pooled[method] = res
                F_hat[method] = res.F_hat
                path = os.path.join(config.out_dir,
                                    f"second_pass_{method}.json")
                _write_second_pass(path, res, spec)
                files[f"second_pass_{method}"] = path
                cpath = os.path.join(config.out_dir,
                                     f"risk_premia_{method}.csv")
                _write_csv(cpath, ["date"] + [f"lambda_{k + 1}"
                                              for k in range(spec.K)],
                           ([panel.date_labels()[t]] + list(lam_path[t])
                            for t in range(panel.T)))
                files[f"risk_premia_{method}"] = cpath
            else:
                bundle.pooled[method] = None
                F_hat[method] = estimate_F(
                    panel.factors[train], panel.instruments[train],
                    gamma=config.tuning.gamma,
                    n_deltas=config.tuning.n_deltas)
            if progress:
                progress(f"stage=pool method={method} done=1")

    mean_paths = {}
    if "predict" in stages:
        if "pool" not in stages:
            raise PanelError("predict stage requires the pool stage")
        for method, fits in bundle.fits.items():
            pred, mean_a, mean_bef = _predict_method(
                method, fits, spec, panel, bundle.pooled.get(method),
                F_hat.get(method), f_bar)
            bundle.predictions[method] = pred
            path = os.path.join(config.out_dir, f"predictions_{method}.csv")
            labels = panel.date_labels()
            rows = ([str(a), labels[t], pred[i, t]]
                    for i, a in enumerate(panel.assets)
                    for t in range(panel.T)
                    if np.isfinite(pred[i, t]))
            _write_csv(path, ["asset_id", "date", "predicted"], rows)
            files[f"predictions_{method}"] = path
            mean_paths[method] = (mean_a, mean_bef)
            if progress:
                progress(f"stage=predict method={method} done=1")

    if "evaluate" in stages:
        if not bundle.predictions:
            raise PanelError("evaluate stage requires the predict stage")
        if not test.any():
            raise PanelError("evaluation needs a test window; set train_end")
        years = panel.months[test] // 12
        for method, pred in bundle.predictions.items():
            pe = portfolio_pe(pred[:, test], panel.returns[:, test],
                              horizon=config.horizon)
            rep = metrics(pe.pe, pe.target, years=years[pe.valid])
            rep.mean_a_hat, rep.mean_b_ef = mean_paths.get(method,
                                                           (None, None))
            rep.truncated = pe.truncated
            bundle.reports[method] = rep
            path = os.path.join(config.out_dir, f"report_{method}.json")
            agg = lambda x: None if x is None else float(np.nanmean(x))
            payload = {
                "rmspe": rep.rmspe, "av_abs_pe": rep.av_abs_pe,
                "std_abs_pe": rep.std_abs_pe, "mape": rep.mape,
                "r2_overall": rep.r2_overall,
                "r2_by_year": {str(y): v for y, v in rep.r2_by_year.items()},
                "mean_a_hat": agg(rep.mean_a_hat),
                "mean_b_ef": agg(rep.mean_b_ef),
                "n_truncated": int(np.sum(rep.truncated)),
                "n_pe_dates": int(np.sum(pe.valid)),
            }
            with open(path, "w") as fh:
                json.dump(payload, fh, sort_keys=True, indent=1,
                          default=float)
            files[f"report_{method}"] = path
            if progress:
                progress(f"stage=evaluate method={method} "
                         f"rmspe={rep.rmspe:.6g}")

    bundle.manifest.update({
        "config_hash": config_hash(config),
        "seed": config.seed,
        "versions": _versions(),
        "n_assets": panel.n_assets,
        "T": panel.T,
        "train_months": int(train.sum()),
        "methods": list(config.methods),
        "short_assets": list(panel.short_assets),
        "files": {k: os.path.basename(v) for k, v in files.items()},
    })
    mpath = os.path.join(config.out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(bundle.manifest, fh, sort_keys=True, indent=1,
                  default=float)
    files["manifest"] = mpath
    return bundle


def _versions():
    import numpy, scipy, numba
    from . import __version__
    return {
        "premia": __version__,
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
    }

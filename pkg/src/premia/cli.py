"""Command line entry points.

Subcommands: fit, predict, evaluate, simulate, enumerate-groups,
check-arbitrage.  Configuration comes from a TOML file plus a few global
flags; all log output is machine-parsable key=value lines on stdout.
Exit codes: 0 success, 2 input validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .design import ModelSpec, dimensions
from .groups import build_groups, count_models, enumerate_models, \
    check_no_arbitrage
from .firstpass import TuningConfig
from .panel import PanelError
from .pipeline import RunConfig, run_pipeline

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def log(**kv):
    parts = []
    for k, v in kv.items():
        if isinstance(v, float):
            v = f"{v:.10g}"
        v = str(v)
        if " " in v or "=" in v:
            v = json.dumps(v)
        parts.append(f"{k}={v}")
    print(" ".join(parts), flush=True)


def _read_toml(path):
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise PanelError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise PanelError(f"could not parse config {path}: {exc}")


def load_run_config(path, overrides=None):
    """TOML file -> RunConfig.  Sections: model, paths, bindings, run,
    tuning; run-section keys land on RunConfig directly."""
    raw = _read_toml(path)
    model = raw.get("model", {})
    for key in ("K", "p", "q"):
        if key not in model:
            raise PanelError(f"config [model] section is missing {key!r}")
    kwargs = {
        "K": int(model["K"]), "p": int(model["p"]), "q": int(model["q"]),
        "paths": dict(raw.get("paths", {})),
        "bindings": raw.get("bindings") or None,
    }
    run = dict(raw.get("run", {}))
    allowed = {"methods", "train_end", "rank_characteristics",
               "standardize_instruments", "horizon", "min_obs", "seed",
               "threads", "out_dir"}
    unknown = set(run) - allowed
    if unknown:
        raise PanelError(f"unknown [run] keys {sorted(unknown)}")
    kwargs.update(run)
    if "tuning" in raw:
        known = set(TuningConfig.__dataclass_fields__)
        unknown = set(raw["tuning"]) - known
        if unknown:
            raise PanelError(f"unknown [tuning] keys {sorted(unknown)}")
        kwargs["tuning"] = TuningConfig(**raw["tuning"])
    config = RunConfig(**kwargs)
    for key, val in (overrides or {}).items():
        if val is not None:
            setattr(config, key, val)
    return config.validate()


def _add_common(sub):
    sub.add_argument("--config", help="TOML run configuration")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--threads", type=int, default=None)
    sub.add_argument("--out", default=None, help="output directory")


def _pipeline_command(args, stages):
    if not args.config:
        raise PanelError("--config is required for this command")
    config = load_run_config(args.config, overrides={
        "seed": args.seed, "threads": args.threads, "out_dir": args.out,
    })
    log(event="start", command=args.command, config=args.config,
        out_dir=config.out_dir, methods=",".join(config.methods))
    bundle = run_pipeline(config, stages=stages, progress=_progress)
    for method, summary in bundle.summaries.items():
        if summary is None:
            continue
        log(event="selection", method=method, n_kept=summary.n_kept,
            ti_pct=summary.ti_pct, arb_pct=summary.arb_pct,
            av_nbreg=summary.av_nbreg)
    for method, rep in bundle.reports.items():
        log(event="report", method=method, rmspe=rep.rmspe, mape=rep.mape,
            r2=rep.r2_overall)
    log(event="done", command=args.command,
        manifest=bundle.files["manifest"])
    return EXIT_OK


def _progress(line):
    print(line, flush=True)


def cmd_fit(args):
    return _pipeline_command(args, stages=("fit",))


def cmd_predict(args):
    return _pipeline_command(args, stages=("fit", "pool", "predict"))


def cmd_evaluate(args):
    return _pipeline_command(args,
                             stages=("fit", "pool", "predict", "evaluate"))


def cmd_simulate(args):
    from .simulate import SimulationConfig, run_study

    kwargs = {}
    if args.config:
        raw = _read_toml(args.config)
        kwargs.update(raw.get("simulation", {}))
        if "tuning" in raw:
            kwargs["tuning"] = TuningConfig(**raw["tuning"])
    if args.study is not None:
        kwargs["study"] = args.study
    if args.replicates is not None:
        kwargs["replicates"] = args.replicates
    if args.seed is not None:
        kwargs["master_seed"] = args.seed
    cfg = SimulationConfig(**kwargs)
    cfg.validate()
    out_dir = args.out or "premia_sim"
    os.makedirs(out_dir, exist_ok=True)
    methods = tuple(args.methods.split(",")) if args.methods \
        else ("aogl", "alasso")
    log(event="start", command="simulate", study=cfg.study,
        replicates=cfg.replicates, methods=",".join(methods))

    def progress(rep):
        log(event="replicate", done=rep + 1, total=cfg.replicates)

    result = run_study(cfg, methods=methods, workers=args.threads,
                       progress=progress)
    table = os.path.join(out_dir, f"study{cfg.study}_summary.csv")
    with open(table, "w") as fh:
        fh.write("method,metric,mean,se,replicates\n")
        for row in result.table_rows():
            fh.write("%s,%s,%.10g,%.10g,%d\n" % (
                row["method"], row["metric"], row["mean"], row["se"],
                row["replicates"]))
    lines = os.path.join(out_dir, f"study{cfg.study}_replicates.jsonl")
    with open(lines, "w") as fh:
        n_rep = cfg.replicates
        for rep in range(n_rep):
            rec = {"replicate": rep}
            for method in methods:
                for metric, vals in result.per_replicate[method].items():
                    v = float(vals[rep])
                    rec[f"{method}.{metric}"] = None if np.isnan(v) else v
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    for rep_idx, trace in result.failures:
        log(event="replicate_failed", replicate=rep_idx,
            error=trace.strip().splitlines()[-1])
    for row in result.table_rows():
        log(event="summary", method=row["method"], metric=row["metric"],
            mean=row["mean"], se=row["se"])
    log(event="done", command="simulate", table=table, lines=lines,
        failures=len(result.failures))
    return EXIT_OK


def cmd_enumerate_groups(args):
    spec = ModelSpec(args.K, args.p, args.q)
    structure = build_groups(spec)
    dims = dimensions(args.K, args.p, args.q)
    counts = count_models(structure)
    log(event="groups", K=args.K, p=args.p, q=args.q, d=dims.d,
        J=structure.J, d_tilde=structure.d_tilde,
        log2_compliant=counts.compliant_exponent,
        log2_unrestricted=counts.unrestricted_exponent)
    if structure.J <= args.max_table:
        table = enumerate_models(structure)
        writer = open(args.out, "w") if args.out else sys.stdout
        writer.write("model,n_groups,covariates\n")
        for i, (sel, supp) in enumerate(zip(table.selections,
                                            table.supports)):
            writer.write("%d,%d,%s\n" % (
                i, len(sel), ";".join(str(j) for j in sorted(supp))))
        if args.out:
            writer.close()
            log(event="done", table=args.out, models=len(table.selections))
    else:
        log(event="skip_table",
            reason=f"J={structure.J} exceeds --max-table={args.max_table}")
    return EXIT_OK


def cmd_check_arbitrage(args):
    spec = ModelSpec(args.K, args.p, args.q)
    try:
        support = frozenset(int(s) for s in args.support.split(",") if s)
    except ValueError:
        raise PanelError(f"bad --support list {args.support!r}")
    if any(j < 1 or j > spec.d for j in support):
        raise PanelError(f"support indices must lie in 1..{spec.d}")
    verdict = check_no_arbitrage(support, spec, strict=args.strict)
    log(event="verdict", compliant=bool(verdict),
        n_support=len(support),
        violations=("; ".join(verdict.violations)
                    if verdict.violations else "none"))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="premia",
        description="Penalized two-pass estimation of conditional linear "
                    "factor models with no-arbitrage group selection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn, helptext in (
        ("fit", cmd_fit, "first-pass per-asset fits only"),
        ("predict", cmd_predict, "fits, pooled second pass, predictions"),
        ("evaluate", cmd_evaluate, "full chain including prediction errors"),
    ):
        s = sub.add_parser(name, help=helptext)
        _add_common(s)
        s.set_defaults(func=fn)

    s = sub.add_parser("simulate", help="run a simulation study")
    _add_common(s)
    s.add_argument("--study", type=int, choices=(1, 2), default=None)
    s.add_argument("--replicates", type=int, default=None)
    s.add_argument("--methods", default=None,
                   help="comma list, default aogl,alasso")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("enumerate-groups",
                       help="group structure and model counts for (K,p,q)")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--max-table", type=int, default=20, dest="max_table")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_enumerate_groups)

    s = sub.add_parser("check-arbitrage",
                       help="check a covariate support for compliance")
    s.add_argument("--K", type=int, required=True)
    s.add_argument("--p", type=int, required=True)
    s.add_argument("--q", type=int, required=True)
    s.add_argument("--support", required=True,
                   help="comma list of 1-based covariate positions")
    s.add_argument("--strict", action="store_true")
    s.set_defaults(func=cmd_check_arbitrage)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PanelError as exc:
        log(event="error", kind="validation", message=str(exc))
        return EXIT_VALIDATION
    except (np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        log(event="error", kind="numerical", message=str(exc))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

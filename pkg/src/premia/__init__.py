"""Penalized two-pass estimation of conditional linear factor models."""

from .design import (
    ModelSpec,
    dimensions,
    build_design,
    build_x1,
    build_x2,
    true_beta,
)
from .groups import (
    build_groups,
    count_models,
    enumerate_models,
    check_no_arbitrage,
)
from .solver import (
    GroupLayout,
    make_problem,
    ridge_init,
    adaptive_weights,
    solve,
    fit_path_aic,
    alasso_fit,
)
from .firstpass import TuningConfig, fit_asset, classify_cross_section
from .secondpass import second_pass, estimate_F, risk_premia
from .evaluate import predict_returns, portfolio_pe, metrics
from .simulate import SimulationConfig, run_study
from .panel import PanelData, load_panel, preprocess, save_panel
from .pipeline import RunConfig, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ModelSpec",
    "dimensions",
    "build_design",
    "build_x1",
    "build_x2",
    "true_beta",
    "build_groups",
    "count_models",
    "enumerate_models",
    "check_no_arbitrage",
    "GroupLayout",
    "make_problem",
    "ridge_init",
    "adaptive_weights",
    "solve",
    "fit_path_aic",
    "alasso_fit",
    "TuningConfig",
    "fit_asset",
    "classify_cross_section",
    "second_pass",
    "estimate_F",
    "risk_premia",
    "predict_returns",
    "portfolio_pe",
    "metrics",
    "SimulationConfig",
    "run_study",
    "PanelData",
    "load_panel",
    "preprocess",
    "save_panel",
    "RunConfig",
    "run_pipeline",
]

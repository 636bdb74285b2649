"""Bundled targets, configuration and experiment drivers."""

from .config import ExperimentConfig, config_from_dict, load_config
from .render import render_heatmap
from .runner import (
    ConvergenceResult,
    ExperimentError,
    PanelOutput,
    SweepReport,
    run_convergence,
    run_panel,
    run_tv_curve,
    run_zeta_sweep,
    select_zeta,
)
from .targets import CONVERGENCE_TARGETS, PANEL_TARGETS, PRIORS, TARGETS, Target, find_target, make_prior

__all__ = [
    "CONVERGENCE_TARGETS",
    "ConvergenceResult",
    "ExperimentConfig",
    "ExperimentError",
    "PANEL_TARGETS",
    "PRIORS",
    "PanelOutput",
    "SweepReport",
    "TARGETS",
    "Target",
    "config_from_dict",
    "find_target",
    "load_config",
    "make_prior",
    "render_heatmap",
    "run_convergence",
    "run_panel",
    "run_tv_curve",
    "run_zeta_sweep",
    "select_zeta",
]

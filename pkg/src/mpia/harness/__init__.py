"""Experiment runner, result files, SVG plots and the command-line interface."""

from .experiment import ExperimentReport, ExperimentSpec, RunRecord, run_experiment, variant_seed
from .plots import emit_front_plot, emit_path_plot, front_svg, path_svg

__all__ = [
    "ExperimentReport",
    "ExperimentSpec",
    "RunRecord",
    "emit_front_plot",
    "emit_path_plot",
    "front_svg",
    "path_svg",
    "run_experiment",
    "variant_seed",
]

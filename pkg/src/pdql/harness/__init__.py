"""Experiment harness: configs, sweeps, aggregation, plots, CLI."""

from .config import ExperimentConfig, LearnerSpec, config_from_dict, load_config
from .experiment import (
    ConvergenceRecord,
    SummaryRow,
    aggregate,
    detect_convergence,
    fit_scaling,
    records_to_csv,
    run_experiment,
    summary_to_csv,
    write_outputs,
)
from .svgplot import emit_plots, figure_a_svg, figure_b_svg

__all__ = [
    "ConvergenceRecord", "ExperimentConfig", "LearnerSpec", "SummaryRow",
    "aggregate", "config_from_dict", "detect_convergence", "emit_plots",
    "figure_a_svg", "figure_b_svg", "fit_scaling", "load_config",
    "records_to_csv", "run_experiment", "summary_to_csv", "write_outputs",
]

"""Hierarchical feature selection for random-kernel time-series classifiers.

Random-kernel features are pruned first by the knee of the sorted ridge
coefficient curve (or by lasso), then by a one-way ANOVA F-score filter.
"""

from .anova import apply_selection, f_scores, select_hiervar
from .data import TimeSeriesDataset, load_ucr_dataset, load_ucr_pair, znormalize
from .knee import kneedle_detect, rank_coefficients, select_erocket
from .linear import cross_validate_lambda, fit_lasso, fit_ridge, predict
from .pipeline import PipelineConfig, evaluate_accuracy, run_pipeline, run_suite
from .representation import fit_biases, generate_kernel_bank, transform

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "TimeSeriesDataset",
    "apply_selection",
    "cross_validate_lambda",
    "evaluate_accuracy",
    "f_scores",
    "fit_biases",
    "fit_lasso",
    "fit_ridge",
    "generate_kernel_bank",
    "kneedle_detect",
    "load_ucr_dataset",
    "load_ucr_pair",
    "predict",
    "rank_coefficients",
    "run_pipeline",
    "run_suite",
    "select_erocket",
    "select_hiervar",
    "transform",
    "znormalize",
]

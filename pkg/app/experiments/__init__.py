"""Scaled simulation study: steps-to-threshold and accuracy versus steps."""

from .analysis import (
    accuracy_fits,
    fit_summary,
    linear_fit,
    scaling_fit,
    successive_ratios,
    summarize_means,
    tv_lower_bound_from_mean,
)
from .replicates import ExperimentRecord, Trajectories, simulate
from .scaling import ExperimentResult, run_accuracy_experiment, run_scaling_experiment

__all__ = [
    "ExperimentRecord",
    "ExperimentResult",
    "Trajectories",
    "accuracy_fits",
    "fit_summary",
    "linear_fit",
    "run_accuracy_experiment",
    "run_scaling_experiment",
    "scaling_fit",
    "simulate",
    "successive_ratios",
    "summarize_means",
    "tv_lower_bound_from_mean",
]

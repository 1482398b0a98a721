"""Joint domain alignment and discriminative feature learning (C++ core)."""

from ._core import (
    ConfigError,
    RunFailure,
    center_loss,
    centered_covariance,
    compactness_ratio,
    config_keys,
    coral_loss,
    gradient_suite,
    instance_loss,
    lambda_schedule,
    pairwise_euclidean,
    run_experiment,
    update_centers,
)

__all__ = [
    "ConfigError",
    "RunFailure",
    "center_loss",
    "centered_covariance",
    "compactness_ratio",
    "config_keys",
    "coral_loss",
    "gradient_suite",
    "instance_loss",
    "lambda_schedule",
    "pairwise_euclidean",
    "run_experiment",
    "update_centers",
]

"""Temperature ladders, Gaussian divergences and partition-function estimation."""

from .divergence import gaussian_overlap, kl_gaussians_equal_mean, tv_overlap_lower_bound
from .schedule import (
    Ladder,
    ScheduleConstants,
    ScheduleParams,
    in_estimation_band,
    level_weights,
    practical_schedule,
    suggested_samples,
    theory_schedule,
)
from .partition import (
    default_restart_cap,
    estimate_partitions,
    log_partition,
    log_partitions,
    quadrature_ladder,
    true_level_weights,
)

__all__ = [
    "Ladder",
    "ScheduleConstants",
    "ScheduleParams",
    "default_restart_cap",
    "estimate_partitions",
    "gaussian_overlap",
    "in_estimation_band",
    "kl_gaussians_equal_mean",
    "level_weights",
    "log_partition",
    "log_partitions",
    "practical_schedule",
    "quadrature_ladder",
    "suggested_samples",
    "theory_schedule",
    "true_level_weights",
    "tv_overlap_lower_bound",
]

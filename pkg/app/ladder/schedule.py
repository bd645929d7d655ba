"""Temperature ladders and algorithm parameters.

Order-of-magnitude formulas are instantiated with explicit constants that
default to 1. The second ratio constraint is used in its 1 + gamma_min/(...)
form so that it bounds a ratio of increasing inverse temperatures.
"""

import math
from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.special import logsumexp

from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)


class Ladder(BaseModel):
    """Inverse temperatures with log partition estimates (log Zhat_1 = 0)."""

    betas: List[float]
    log_zhat: List[float]
    r: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self) -> "Ladder":
        betas = np.asarray(self.betas, dtype=float)
        if betas.size < 1:
            raise ValueError("ladder needs at least one level")
        if np.any(betas <= 0):
            raise ValueError("inverse temperatures must be positive")
        if np.any(np.diff(betas) <= 0):
            raise ValueError("inverse temperatures must be strictly increasing")
        if abs(betas[-1] - 1.0) > 1e-12:
            raise ValueError(f"last inverse temperature must be 1, got {betas[-1]!r}")
        if len(self.log_zhat) != betas.size:
            raise ValueError(f"{len(self.log_zhat)} partition estimates for {betas.size} levels")
        if not np.all(np.isfinite(self.log_zhat)):
            raise ValueError("partition estimates must be finite")
        if abs(self.log_zhat[0]) > 1e-12:
            raise ValueError("the first partition estimate must be 1 (log 0)")
        if self.r is not None:
            r = np.asarray(self.r, dtype=float)
            if r.size != betas.size or np.any(r <= 0):
                raise ValueError("level weights must be positive, one per level")
            if abs(r.sum() - 1.0) > 1e-12:
                raise ValueError(f"level weights sum to {r.sum()!r}, expected 1")
        return self

    @property
    def n_levels(self) -> int:
        return len(self.betas)

    @classmethod
    def single(cls) -> "Ladder":
        return cls(betas=[1.0], log_zhat=[0.0], r=[1.0])

    @classmethod
    def from_log_partitions(cls, betas: Sequence[float], log_z: Sequence[float]) -> "Ladder":
        """Exact estimates: Zhat_i = Z_i / Z_1, so every level weight is 1/L."""
        log_z = np.asarray(log_z, dtype=float)
        log_zhat = log_z - log_z[0]
        return cls(
            betas=list(betas),
            log_zhat=log_zhat.tolist(),
            r=level_weights(log_z, log_zhat).tolist(),
        )

    def with_weights(self, log_z: Sequence[float]) -> "Ladder":
        return self.model_copy(update={"r": level_weights(log_z, self.log_zhat).tolist()})


class ScheduleParams(BaseModel):
    mode: Literal["theory", "practical"]
    levels: int = Field(ge=1)
    ratio: float = Field(gt=1.0)
    beta1: float = Field(gt=0.0)
    betas: List[float]
    radius: float = Field(gt=0.0)
    steps: int = Field(ge=0)
    sigma0_sq: float = Field(gt=0.0)
    lam: float = Field(gt=0.0, lt=1.0)
    eta: float = Field(gt=0.0)
    levels_order: float = 0.0
    epsilon: float = Field(0.1, gt=0.0, lt=1.0)


class ScheduleConstants(BaseModel):
    beta_constant: float = Field(1.0, gt=0.0)
    sigma_constant: float = Field(1.0, gt=0.0)
    steps_constant: float = Field(1.0, gt=0.0)
    steps_exponent: float = 1.0


def level_weights(log_z: Sequence[float], log_zhat: Sequence[float]) -> np.ndarray:
    """r_i = (Z_i / Zhat_i) / sum_k (Z_k / Zhat_k), in the log domain."""
    log_ratio = np.asarray(log_z, dtype=float) - np.asarray(log_zhat, dtype=float)
    return np.exp(log_ratio - logsumexp(log_ratio))


def in_estimation_band(log_z: Sequence[float], log_zhat: Sequence[float]) -> bool:
    """(Zhat_i/Z_i)/(Zhat_1/Z_1) lies in [(1-1/L)^(i-1), (1+1/L)^(i-1)] for every i."""
    log_z = np.asarray(log_z, dtype=float)
    log_zhat = np.asarray(log_zhat, dtype=float)
    n_levels = log_z.size
    if n_levels == 1:
        return True
    rel = (log_zhat - log_z) - (log_zhat[0] - log_z[0])
    steps = np.arange(n_levels)
    with np.errstate(divide="ignore", invalid="ignore"):
        lo = np.where(steps == 0, 0.0, steps * math.log1p(-1.0 / n_levels))
    hi = steps * math.log1p(1.0 / n_levels)
    return bool(np.all((rel >= lo - 1e-12) & (rel <= hi + 1e-12)))


def suggested_samples(n_levels: int, epsilon: float) -> int:
    """Per-level sample count s = L^2 log(4L / eps)."""
    return max(1, math.ceil(n_levels**2 * math.log(4.0 * n_levels / epsilon)))


def theory_ratio(target: GaussianMixtureTarget) -> float:
    d = target.dim
    D2 = target.separation**2
    gap_term = 1.0 + target.gamma_min / (D2 + 2.0 * target.gamma_max * d * target.nu)
    return min(1.0 + 1.0 / math.sqrt(d), gap_term)


def first_beta(target: GaussianMixtureTarget, constant: float = 1.0) -> float:
    return constant * target.gamma_min / target.separation**2


def levels_for_ratio(beta1: float, ratio: float) -> int:
    """Smallest L with beta1 * ratio^(L-1) >= 1."""
    if beta1 >= 1.0:
        return 1
    levels = 1 + math.ceil(math.log(1.0 / beta1) / math.log(ratio))
    # guard the closed form against rounding at exact powers
    while levels > 1 and beta1 * ratio ** (levels - 2) >= 1.0:
        levels -= 1
    while beta1 * ratio ** (levels - 1) < 1.0:
        levels += 1
    return levels


def levels_order(target: GaussianMixtureTarget) -> float:
    """Order-of-magnitude level count kappa{D^2 + log w_min^-1 + d(1+log kappa)} log(D^2/gamma_min) + 1."""
    kappa, d = target.kappa, target.dim
    D2 = target.separation**2
    bracket = D2 + math.log(1.0 / target.w_min) + d * (1.0 + math.log(kappa))
    return kappa * bracket * math.log(D2 / target.gamma_min) + 1.0


def restriction_radius(target: GaussianMixtureTarget, n_levels: int, epsilon: float) -> float:
    D, d, kappa = target.separation, target.dim, target.kappa
    log_arg = 20.0 * math.exp(6.0) * n_levels**2 * kappa**d / (target.w_min**2 * epsilon)
    return D + math.sqrt(d * kappa * D**2) + math.sqrt(2.0 * kappa * D**2 * math.log(log_arg))


def step_budget(
    target: GaussianMixtureTarget,
    n_levels: int,
    radius: float,
    epsilon: float,
    constants: ScheduleConstants,
) -> int:
    d, kappa, w_min = target.dim, target.kappa, target.w_min
    log_steps = (
        math.log(constants.steps_constant)
        + 4.0 * math.log(n_levels)
        + d * math.log(radius)
        + 0.5 * d * math.log(kappa)
        + constants.steps_exponent * d
        - 0.5 * d * math.log(target.gamma_min)
        - 5.0 * math.log(w_min)
    )
    log_factor = math.log(n_levels**2 * kappa**d / (epsilon**2 * w_min**2))
    return math.ceil(math.exp(log_steps) * log_factor)


def _finish(
    mode: str,
    target: GaussianMixtureTarget,
    betas: List[float],
    ratio: float,
    beta1: float,
    epsilon: float,
    lam: float,
    constants: ScheduleConstants,
    eta: Optional[float],
    sigma0_sq: Optional[float],
) -> ScheduleParams:
    n_levels = len(betas)
    radius = restriction_radius(target, n_levels, epsilon)
    return ScheduleParams(
        mode=mode,
        levels=n_levels,
        ratio=ratio,
        beta1=beta1,
        betas=betas,
        radius=radius,
        steps=step_budget(target, n_levels, radius, epsilon, constants),
        sigma0_sq=sigma0_sq if sigma0_sq is not None else constants.sigma_constant * target.gamma_min / beta1,
        lam=lam,
        eta=eta if eta is not None else radius**2,
        levels_order=levels_order(target),
        epsilon=epsilon,
    )


def theory_schedule(
    target: GaussianMixtureTarget,
    epsilon: float = 0.1,
    constants: Optional[ScheduleConstants] = None,
    lam: float = 0.5,
    eta: Optional[float] = None,
    sigma0_sq: Optional[float] = None,
) -> ScheduleParams:
    """Geometric ladder at the largest ratio both constraints allow."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    constants = constants or ScheduleConstants()
    beta1 = min(1.0, first_beta(target, constants.beta_constant))
    ratio = theory_ratio(target)
    n_levels = levels_for_ratio(beta1, ratio)
    betas = [beta1 * ratio**i for i in range(n_levels - 1)] + [1.0]
    logger.info(
        f"Theory schedule: beta1={beta1:.6g}, ratio={ratio:.8g}, L={n_levels} "
        f"(order estimate {levels_order(target):.4g})"
    )
    return _finish("theory", target, betas, ratio, beta1, epsilon, lam, constants, eta, sigma0_sq)


def practical_schedule(
    target: GaussianMixtureTarget,
    n_levels: int,
    epsilon: float = 0.1,
    constants: Optional[ScheduleConstants] = None,
    lam: float = 0.5,
    eta: Optional[float] = None,
    sigma0_sq: Optional[float] = None,
) -> ScheduleParams:
    """L-level geometric ladder from beta1 = gamma_min/D^2 up to 1."""
    if n_levels < 1:
        raise ValueError(f"number of levels must be >= 1, got {n_levels}")
    constants = constants or ScheduleConstants()
    beta1 = first_beta(target, constants.beta_constant)

    if beta1 >= 1.0 or n_levels == 1:
        if beta1 < 1.0:
            logger.warning(
                f"Single-level ladder requested while beta1={beta1:.6g} < 1; "
                f"running plain Metropolis at beta=1"
            )
        elif n_levels > 1:
            logger.warning(f"beta1={beta1:.6g} >= 1, collapsing the {n_levels}-level ladder to one level")
        beta1 = min(beta1, 1.0)
        return _finish(
            "practical", target, [1.0], theory_ratio(target), beta1,
            epsilon, lam, constants, eta, sigma0_sq,
        )

    ratio = (1.0 / beta1) ** (1.0 / (n_levels - 1))
    betas = [beta1 * ratio**i for i in range(n_levels - 1)] + [1.0]
    logger.info(f"Practical schedule: L={n_levels}, beta1={beta1:.6g}, ratio={ratio:.6g}")
    return _finish("practical", target, betas, ratio, beta1, epsilon, lam, constants, eta, sigma0_sq)

"""Partition functions: quadrature oracle and sequential estimation.

The estimator walks up the ladder. For level l it restarts the tempering
chain on the first l levels from a fresh x0 ~ N(0, sigma0^2 I), keeps the
final states that sit at level l, and once s of them are in hand sets

    log Zhat_{l+1} = log Zhat_l - log s + logsumexp((beta_l - beta_{l+1}) f(x_j))
"""

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from app.errors import EstimationStallError, NumericError
from app.kernels.ensemble import init_ensemble, run_ensemble
from app.kernels.tempering import TemperingKernel
from app.kernels.variates import VariateStream, initial_point
from app.ladder.schedule import Ladder, ScheduleParams
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)

# spawn_key namespace of estimation restarts: (ESTIMATE_STREAM, level, restart)
ESTIMATE_STREAM = 1

QUAD_REL_TOL = 1e-9
QUAD_LIMIT = 200
# integration half-width in standard deviations beyond the outermost mean
TAIL_WIDTH = 12.0


def default_restart_cap(level: int, samples: int) -> int:
    """T_cap = ceil(10 e^2 l s ln(s + 1))."""
    return math.ceil(10.0 * math.e**2 * level * samples * math.log(samples + 1.0))


def log_ratio_update(log_zhat: float, beta: float, beta_next: float, potentials: Sequence[float]) -> float:
    """log Zhat_{l+1} from log Zhat_l and f at the s level-l samples."""
    f = np.asarray(potentials, dtype=float)
    if f.size == 0:
        raise ValueError("at least one sample is required")
    value = log_zhat - math.log(f.size) + float(logsumexp((beta - beta_next) * f))
    if not math.isfinite(value):
        raise NumericError(f"partition update produced a non-finite value ({value})")
    return value


def _collinear_axis(target: GaussianMixtureTarget) -> Optional[np.ndarray]:
    """Unit direction containing every whitened mean, or None."""
    white = target.white_means
    _, sv, vt = np.linalg.svd(white, full_matrices=True)
    if sv.size == 0 or sv[0] == 0.0:
        axis = np.zeros(target.dim)
        axis[0] = 1.0
        return axis
    if sv.size > 1 and sv[1] > 1e-12 * sv[0]:
        return None
    return vt[0]


def _quad(integrand, half: float, breaks: Sequence[float], rel_tol: float, beta: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(
                integrand, -half, half, points=sorted(set(breaks)) or None,
                epsabs=0.0, epsrel=rel_tol, limit=QUAD_LIMIT,
            )
        except integrate.IntegrationWarning as e:
            raise NumericError(f"quadrature did not converge at beta={beta:.6g}: {e}") from e
    return value


def _log_partition_collinear(target: GaussianMixtureTarget, beta: float, axis: np.ndarray, rel_tol: float) -> float:
    # whitened coordinates: f = |y_perp|^2/2 - log sum_j w_j exp(-(t - a_j)^2/2)
    offsets = target.white_means @ axis
    log_w = target.log_weights

    def profile(t: float) -> float:
        return -float(logsumexp(log_w - 0.5 * (t - offsets) ** 2))

    shift = min(profile(a) for a in offsets)
    half = float(np.abs(offsets).max()) + TAIL_WIDTH / math.sqrt(beta)
    value = _quad(lambda t: math.exp(-beta * (profile(t) - shift)), half, offsets.tolist(), rel_tol, beta)
    if not value > 0.0:
        raise NumericError(f"quadrature returned a non-positive mass at beta={beta:.6g}")

    d = target.dim
    log_det_chol = float(np.sum(np.log(np.diag(target.chol))))
    return log_det_chol + 0.5 * (d - 1) * math.log(2.0 * math.pi / beta) + math.log(value) - beta * shift


def _log_partition_grid(target: GaussianMixtureTarget, beta: float, rel_tol: float) -> float:
    shift = float(np.min(target.potential(target.means)))
    radius = float(np.linalg.norm(target.means, axis=1).max())
    half = radius + TAIL_WIDTH * math.sqrt(target.gamma_max / beta)

    def integrand(x0: float, x1: float) -> float:
        return math.exp(-beta * (float(target.potential(np.array([x0, x1]))) - shift))

    opts = [
        {"points": sorted({float(m) for m in target.means[:, k]}), "epsabs": 0.0,
         "epsrel": rel_tol, "limit": QUAD_LIMIT}
        for k in range(2)
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            # nquad integrates x0 innermost; opts follow the same order
            value, _ = integrate.nquad(integrand, [[-half, half], [-half, half]], opts=opts)
        except integrate.IntegrationWarning as e:
            raise NumericError(f"quadrature did not converge at beta={beta:.6g}: {e}") from e

    if not value > 0.0:
        raise NumericError(f"quadrature returned a non-positive mass at beta={beta:.6g}")
    return math.log(value) - beta * shift


def log_partition(target: GaussianMixtureTarget, beta: float, rel_tol: float = QUAD_REL_TOL) -> float:
    """log Z_beta = log of the integral of exp(-beta f) by adaptive quadrature.

    Targets whose whitened means share a line through the origin reduce to a
    one-dimensional integral in any dimension; other targets need d <= 2.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"inverse temperature must lie in (0, 1], got {beta}")
    axis = _collinear_axis(target)
    if axis is not None:
        return _log_partition_collinear(target, beta, axis, rel_tol)
    if target.dim > 2:
        raise ValueError(f"quadrature is limited to d <= 2 for these means, got d={target.dim}")
    return _log_partition_grid(target, beta, rel_tol)


def log_partitions(target: GaussianMixtureTarget, betas: Sequence[float]) -> np.ndarray:
    return np.array([log_partition(target, b) for b in betas])


def true_level_weights(
    target: GaussianMixtureTarget,
    betas: Sequence[float],
    log_zhat: Sequence[float],
) -> np.ndarray:
    """Level weights r_i proportional to Z_i / Zhat_i with Z_i from quadrature."""
    ladder = Ladder(betas=list(betas), log_zhat=list(log_zhat))
    return np.asarray(ladder.with_weights(log_partitions(target, betas)).r)


def quadrature_ladder(target: GaussianMixtureTarget, betas: Sequence[float]) -> Ladder:
    """Ladder with exact estimates from quadrature; level weights are uniform."""
    return Ladder.from_log_partitions(betas, log_partitions(target, betas))


def _run_restarts(
    kernel: TemperingKernel,
    seed: int,
    level: int,
    first: int,
    count: int,
    run_steps: int,
    sigma0_sq: float,
) -> List[np.ndarray]:
    """Final states of restarts first..first+count-1; None where not at `level`."""
    dim = kernel.dim
    keys = [(ESTIMATE_STREAM, level, k) for k in range(first, first + count)]
    x0s = np.stack([initial_point(seed, key, dim, sigma0_sq) for key in keys])
    streams = [VariateStream(seed, key, dim) for key in keys]
    state = init_ensemble(kernel, x0s, np.ones(count, dtype=int))
    state = run_ensemble(kernel, state, streams, run_steps)
    return [state.xs[r].copy() if state.levels[r] == level else None for r in range(count)]


def estimate_partitions(
    target: GaussianMixtureTarget,
    schedule: ScheduleParams,
    samples: int,
    run_steps: int,
    restart_cap: Optional[int] = None,
    seed: int = 0,
    batch: int = 16,
    threads: int = 1,
) -> Ladder:
    """Sequential partition-function estimation; returns a ladder with log Zhat_1 = 0."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if run_steps < 0:
        raise ValueError("run_steps must be >= 0")
    if batch < 1 or threads < 1:
        raise ValueError("batch and threads must be >= 1")

    betas = np.asarray(schedule.betas, dtype=float)
    log_zhat = [0.0]
    if betas.size == 1:
        return Ladder(betas=betas.tolist(), log_zhat=log_zhat)

    with ThreadPoolExecutor(max_workers=threads) as pool:
        for level in range(1, betas.size):
            cap = restart_cap if restart_cap is not None else default_restart_cap(level, samples)
            kernel = TemperingKernel(
                target=target,
                betas=betas[:level],
                log_zhat=np.asarray(log_zhat, dtype=float),
                lam=schedule.lam,
                eta=schedule.eta,
            )

            found: List[np.ndarray] = []
            launched = 0
            while len(found) < samples:
                if launched >= cap:
                    raise EstimationStallError(level, launched, len(found), samples)
                starts = []
                for _ in range(threads):
                    count = min(batch, cap - launched)
                    if count <= 0:
                        break
                    starts.append((launched, count))
                    launched += count
                futures = [
                    pool.submit(_run_restarts, kernel, seed, level, first, count, run_steps, schedule.sigma0_sq)
                    for first, count in starts
                ]
                # first successes in restart order, whatever the thread count
                for future in futures:
                    for x in future.result():
                        if x is not None and len(found) < samples:
                            found.append(x)

            potentials = np.asarray(target.potential(np.stack(found)))
            log_zhat.append(log_ratio_update(log_zhat[-1], betas[level - 1], betas[level], potentials))
            logger.debug(
                f"Level {level}: {samples} samples after {launched} restarts, "
                f"log Zhat_{level + 1} = {log_zhat[-1]:.6g}"
            )

    logger.info(f"Estimated partition functions for {betas.size} levels")
    return Ladder(betas=betas.tolist(), log_zhat=log_zhat)

"""Random-walk Metropolis-Hastings with isotropic Gaussian proposals."""

from typing import Callable, Tuple

import numpy as np

from app.errors import StateError
from app.kernels.variates import ACCEPT, VariateStream

LogDensity = Callable[[np.ndarray], float]


def log_acceptance(log_pi_x: float, log_pi_y: float) -> float:
    """log min{1, pi(y)/pi(x)}; a non-finite proposal density gives -inf."""
    if not np.isfinite(log_pi_y):
        return -np.inf
    return min(0.0, float(log_pi_y - log_pi_x))


def acceptance_probability(log_pi: LogDensity, x: np.ndarray, y: np.ndarray) -> float:
    """Probability of accepting a move x -> y under a symmetric proposal."""
    log_pi_x = float(log_pi(np.asarray(x, dtype=float)))
    if not np.isfinite(log_pi_x):
        raise StateError(f"log density is not finite at the current point ({log_pi_x})")
    return float(np.exp(log_acceptance(log_pi_x, float(log_pi(np.asarray(y, dtype=float))))))


def accepts(u: float, log_a: np.ndarray) -> np.ndarray:
    """Accept where u < exp(min(0, log a)); works elementwise on arrays."""
    with np.errstate(over="ignore", invalid="ignore"):
        prob = np.exp(np.minimum(0.0, np.nan_to_num(log_a, nan=-np.inf)))
    return np.asarray(u) < prob


def rwmh_step(
    log_pi: LogDensity,
    x: np.ndarray,
    eta: float,
    stream: VariateStream,
) -> Tuple[np.ndarray, bool]:
    """One RWMH move: propose y = x + sqrt(eta) z and accept by the MH ratio."""
    if eta <= 0:
        raise ValueError(f"step size eta must be positive, got {eta}")
    x = np.asarray(x, dtype=float)
    log_pi_x = float(log_pi(x))
    if not np.isfinite(log_pi_x):
        raise StateError(f"log density is not finite at the current point ({log_pi_x})")

    u, z = stream.next()
    y = x + np.sqrt(eta) * z
    log_a = log_acceptance(log_pi_x, float(log_pi(y)))
    if bool(accepts(u[ACCEPT], log_a)):
        return y, True
    return x.copy(), False

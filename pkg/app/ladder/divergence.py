"""KL and total-variation helpers for equal-mean Gaussians."""

from typing import Union

import numpy as np
from scipy.linalg import cholesky, solve_triangular

Matrix = Union[float, np.ndarray]


def _factor(cov: Matrix, name: str) -> np.ndarray:
    mat = np.atleast_2d(np.asarray(cov, dtype=float))
    if mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    try:
        return cholesky(mat, lower=True)
    except np.linalg.LinAlgError as e:
        raise ValueError(f"{name} is not positive definite") from e


def kl_gaussians_equal_mean(cov1: Matrix, cov2: Matrix) -> float:
    """KL(N(0, cov1) || N(0, cov2)) = 1/2 (log |cov2|/|cov1| - d + tr(cov2^-1 cov1))."""
    l1 = _factor(cov1, "cov1")
    l2 = _factor(cov2, "cov2")
    if l1.shape != l2.shape:
        raise ValueError(f"dimension mismatch: {l1.shape[0]} vs {l2.shape[0]}")

    d = l1.shape[0]
    logdet1 = 2.0 * np.sum(np.log(np.diag(l1)))
    logdet2 = 2.0 * np.sum(np.log(np.diag(l2)))
    # tr(cov2^-1 cov1) = ||l2^-1 l1||_F^2
    trace = float(np.sum(solve_triangular(l2, l1, lower=True) ** 2))
    # rounding can leave a -1e-16 residue for equal covariances
    return max(0.0, 0.5 * (logdet2 - logdet1 - d + trace))


def tv_overlap_lower_bound(kl: float) -> float:
    """Lower bound 1 - sqrt(kl/2) on the overlap integral of min{p, q}, clipped at 0."""
    if kl < 0:
        raise ValueError(f"KL divergence must be non-negative, got {kl}")
    return max(0.0, 1.0 - float(np.sqrt(kl / 2.0)))


def gaussian_overlap(cov1: Matrix, cov2: Matrix) -> float:
    """Overlap bound between adjacent tempered components N(0, cov1), N(0, cov2)."""
    return tv_overlap_lower_bound(kl_gaussians_equal_mean(cov1, cov2))

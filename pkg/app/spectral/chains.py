"""Finite Markov chains: stationary vectors and (restricted) spectral gaps.

The restricted gap is the smallest generalized Rayleigh quotient A(g)/B(g)
over functions non-constant on the mask, where

    A(g) = 1/2 sum_{a,b in mask} (g_b - g_a)^2 pi_a K_ab
    B(g) = 1/2 sum_{a,b in mask} (g_b - g_a)^2 pi_a pi_b

Both forms annihilate constants. In the coordinates h = sqrt(pi) g the
constant mode is sqrt(pi) and B is mass times the identity on its
complement, so states of tiny but positive mass keep the pencil definite.
"""

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from app.errors import DegenerateRestrictionError, NumericError

ROW_TOL = 1e-12
STATIONARY_TOL = 1e-10
RESIDUAL_TOL = 1e-12


@dataclass(eq=False)
class DiscreteChain:
    P: np.ndarray
    pi: Optional[np.ndarray] = None
    states: Optional[Sequence] = field(default=None, repr=False)

    def __post_init__(self):
        P = np.asarray(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError(f"transition matrix must be square, got shape {P.shape}")
        if np.any(P < 0):
            raise ValueError("transition matrix has negative entries")
        if np.max(np.abs(P.sum(axis=1) - 1.0)) > ROW_TOL:
            raise ValueError("transition matrix rows must sum to 1")
        self.P = P
        if self.pi is None:
            self.pi = stationary_vector(P)
        else:
            self.pi = np.asarray(self.pi, dtype=float)
            if self.pi.shape != (P.shape[0],):
                raise ValueError("stationary vector has the wrong length")
            if np.max(np.abs(self.pi @ P - self.pi)) > STATIONARY_TOL:
                raise NumericError("supplied vector is not stationary for the chain")

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def detailed_balance_residual(self) -> float:
        flow = self.pi[:, None] * self.P
        return float(np.max(np.abs(flow - flow.T)))


def stationary_vector(P: np.ndarray) -> np.ndarray:
    """Left eigenvector of P for eigenvalue 1, normalized to sum 1."""
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    if n == 1:
        return np.ones(1)

    try:
        values, left = linalg.eig(P, left=True, right=False)
    except linalg.LinAlgError as e:
        raise NumericError(f"eigensolver failed: {e}") from e

    near_one = np.flatnonzero(np.abs(values - 1.0) < 1e-9)
    if near_one.size != 1:
        raise NumericError(f"eigenvalue 1 has multiplicity {near_one.size}; chain is not irreducible")
    vec = np.real(left[:, near_one[0]])
    pi = vec / vec.sum()

    if np.max(np.abs(pi @ P - pi)) > RESIDUAL_TOL or np.any(pi < 0):
        # polish with the bordered linear system pi (I - P) = 0, sum(pi) = 1
        system = (np.eye(n) - P).T
        system[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pi = linalg.solve(system, rhs)
        except linalg.LinAlgError as e:
            raise NumericError(f"stationary system is singular: {e}") from e

    residual = np.max(np.abs(pi @ P - pi))
    if residual > RESIDUAL_TOL:
        raise NumericError(f"stationary vector residual {residual:.3e} exceeds {RESIDUAL_TOL:.0e}")
    return np.clip(pi, 0.0, None) / np.clip(pi, 0.0, None).sum()


def _constant_complement(root: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of sqrt(pi), the constant mode in weighted coordinates."""
    return linalg.null_space(root[None, :])


def restricted_spectral_gap(chain: DiscreteChain, mask: Optional[np.ndarray] = None) -> float:
    """Restricted spectral gap of the chain on the states selected by mask."""
    idx = np.arange(chain.size) if mask is None else np.flatnonzero(np.asarray(mask, dtype=bool))
    if idx.size < 2:
        raise ValueError("restriction needs at least two states")
    pi = chain.pi[idx]
    if np.any(pi <= 0.0):
        raise DegenerateRestrictionError(
            "variance form is singular beyond the constant mode (a masked state has no mass)"
        )
    mass = pi.sum()

    flow = pi[:, None] * chain.P[np.ix_(idx, idx)]
    flow = 0.5 * (flow + flow.T)
    # h = sqrt(pi) g turns B into mass (I - u u^T) with u = sqrt(pi / mass)
    root = np.sqrt(pi)
    form_a = (np.diag(flow.sum(axis=1)) - flow) / root[:, None] / root[None, :]

    basis = _constant_complement(root)
    reduced_a = basis.T @ form_a @ basis
    reduced_a = 0.5 * (reduced_a + reduced_a.T)
    reduced_b = mass * np.eye(basis.shape[1])
    try:
        values = linalg.eigh(reduced_a, reduced_b, eigvals_only=True)
    except linalg.LinAlgError as e:
        raise NumericError(f"generalized eigensolver failed: {e}") from e
    return float(max(values[0], 0.0))


def reversible_spectral_gap(P: np.ndarray, pi: np.ndarray) -> float:
    """1 - lambda_2 of D^1/2 P D^-1/2, symmetrized (additive reversibilization)."""
    P = np.asarray(P, dtype=float)
    root = np.sqrt(np.asarray(pi, dtype=float))
    sym = root[:, None] * P / root[None, :]
    sym = 0.5 * (sym + sym.T)
    values = linalg.eigvalsh(sym)
    if values.size < 2:
        raise ValueError("spectral gap needs at least two states")
    return float(1.0 - values[-2])


def dirichlet_form(chain: DiscreteChain, g: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """1/2 sum over mask pairs of (g_b - g_a)^2 pi_a K_ab."""
    idx = np.arange(chain.size) if mask is None else np.flatnonzero(np.asarray(mask, dtype=bool))
    gi = np.asarray(g, dtype=float)[idx]
    diff = gi[None, :] - gi[:, None]
    return float(0.5 * np.sum(diff**2 * chain.pi[idx][:, None] * chain.P[np.ix_(idx, idx)]))


def variance_form(pi: np.ndarray, g: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """1/2 sum over mask pairs of (g_b - g_a)^2 pi_a pi_b."""
    pi = np.asarray(pi, dtype=float)
    idx = np.arange(pi.size) if mask is None else np.flatnonzero(np.asarray(mask, dtype=bool))
    gi = np.asarray(g, dtype=float)[idx]
    p = pi[idx]
    # closed form of the double sum: mass * sum p g^2 - (sum p g)^2
    return float(p.sum() * np.dot(p, gi**2) - np.dot(p, gi) ** 2)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """L1 distance sum |p - q|, in [0, 2]."""
    return float(np.sum(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float))))

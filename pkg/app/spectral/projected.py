"""Projected chain on (level, component) pairs.

State (i, j) sits at index (i - 1) * n + (j - 1). Integrals over X0 become
sums over the masked grid points.
"""

from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from app.errors import DegenerateRestrictionError, InvariantError
from app.spectral.discretize import DiscreteSTChain

BALANCE_TOL = 1e-12


@dataclass(eq=False)
class ProjectedChain:
    Mbar: np.ndarray
    Pbar: np.ndarray
    n_levels: int
    n_components: int

    @property
    def size(self) -> int:
        return self.Mbar.shape[0]

    def index(self, level: int, component: int) -> int:
        return (level - 1) * self.n_components + (component - 1)

    def balance_residual(self) -> float:
        flow = self.Pbar[:, None] * self.Mbar
        return float(np.max(np.abs(flow - flow.T)))


def build_projected(st: DiscreteSTChain) -> ProjectedChain:
    """Projected chain of a discrete tempering chain and its stationary vector."""
    n_levels, n_comp = st.n_levels, st.n_components
    inside = st.grid_mask
    masses = st.component_masses
    if np.any(masses <= 0):
        raise DegenerateRestrictionError("a component has no mass on the restriction set")

    comp = st.component_density[:, :, inside]  # (L, n, G0)
    level = st.level_density[:, inside]  # (L, G0)
    w = st.component_weights
    cond = comp / masses[:, :, None]  # p_(i,j)(x) / P_(i,j)(X0)

    size = n_levels * n_comp
    M = np.zeros((size, size))
    for i in range(n_levels):
        # p_i(j'|x) = w_(i,j') p_(i,j')(x) / p_i(x)
        posterior = w[i][:, None] * comp[i] / level[i][None, :]
        for j in range(n_comp):
            row = i * n_comp + j
            for jp in range(n_comp):
                if jp != j:
                    M[row, i * n_comp + jp] = (1.0 - st.lam) * float(np.dot(cond[i, j], posterior[jp]))
            for ip in (i - 1, i + 1):
                if not 0 <= ip < n_levels:
                    continue
                with np.errstate(divide="ignore"):
                    log_a = np.minimum(
                        0.0,
                        np.log(st.r[ip] * w[ip, j] * comp[ip, j]) - np.log(st.r[i] * w[i, j] * comp[i, j]),
                    )
                M[row, ip * n_comp + j] = 0.5 * st.lam * float(np.dot(cond[i, j], np.exp(log_a)))

    np.fill_diagonal(M, 0.0)
    diagonal = 1.0 - M.sum(axis=1)
    if np.any(diagonal < -1e-14):
        raise InvariantError(f"projected chain has a negative holding probability ({diagonal.min():.3e})")
    np.fill_diagonal(M, np.clip(diagonal, 0.0, None))

    Pbar = (st.r[:, None] * w * masses).ravel()
    Pbar = Pbar / Pbar.sum()
    chain = ProjectedChain(Mbar=M, Pbar=Pbar, n_levels=n_levels, n_components=n_comp)
    residual = chain.balance_residual()
    if residual > BALANCE_TOL:
        raise InvariantError(f"projected stationary vector violates detailed balance ({residual:.3e})")
    return chain


def projected_paths(n_levels: int, n_components: int) -> Dict[Tuple[int, int], List[int]]:
    """Canonical paths between every ordered pair of (level, component) states.

    Same component: walk the levels directly. Different components: descend
    to level 1, switch components there, climb to the target level.
    """

    def idx(level: int, component: int) -> int:
        return (level - 1) * n_components + (component - 1)

    def walk(component: int, start: int, stop: int) -> List[int]:
        step = 1 if stop >= start else -1
        return [idx(level, component) for level in range(start, stop + step, step)]

    paths: Dict[Tuple[int, int], List[int]] = {}
    states = [(i, j) for i in range(1, n_levels + 1) for j in range(1, n_components + 1)]
    for (i, j) in states:
        for (ip, jp) in states:
            if (i, j) == (ip, jp):
                continue
            if j == jp:
                path = walk(j, i, ip)
            else:
                path = walk(j, i, 1) + walk(jp, 1, ip)
            paths[(idx(i, j), idx(ip, jp))] = path
    return paths

"""Discrete simulated-tempering chains on a regular grid.

States are (level, grid point) flattened level-major: s = (i - 1) * G + g.
Local moves are Metropolis chains with a truncated Gaussian proposal

    Q(x, y) = exp(-|y - x|^2 / (2 eta)) / c,   y != x, |y - x| <= rho

where c is the row sum of an interior point (offset 0 included), so Q is
symmetric and boundary rows keep their missing mass as a self-loop.
Component densities p_(i,j) are grid-renormalized Gaussians and
w_(i,j) = w_j Z_(i,j) / sum_k w_k Z_(i,k) with grid masses Z_(i,j), which
makes p_i = sum_j w_(i,j) p_(i,j) exact on the grid.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.special import logsumexp

from app.errors import CapacityError, DegenerateRestrictionError
from app.spectral.chains import DiscreteChain
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)

MAX_STATES = 20_000
TRUNCATION_SCALE = 6.0

DensityKind = Literal["tilde", "tempered"]


@dataclass(frozen=True)
class GridSpec:
    extent: float
    points: int

    def __post_init__(self):
        if self.extent <= 0:
            raise ValueError("grid extent must be positive")
        if self.points < 2:
            raise ValueError("grid needs at least two points per axis")

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / (self.points - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(-self.extent, self.extent, self.points)

    def coordinates(self, dim: int) -> np.ndarray:
        """Grid points as rows, first axis varying slowest."""
        axis = self.axis()
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def proposal_matrix(grid: GridSpec, dim: int, eta: float) -> np.ndarray:
    """Symmetric sub-stochastic proposal on the grid (zero diagonal)."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    coords = grid.coordinates(dim)
    diameter = 2.0 * grid.extent * math.sqrt(dim)
    radius = min(TRUNCATION_SCALE * math.sqrt(eta), diameter)

    reach = int(math.floor(radius / grid.spacing + 1e-9))
    offsets = np.array(list(itertools.product(range(-reach, reach + 1), repeat=dim)), dtype=float)
    off_sq = np.sum((offsets * grid.spacing) ** 2, axis=1)
    inside = off_sq <= radius**2 + 1e-12
    normalizer = float(np.sum(np.exp(-off_sq[inside] / (2.0 * eta))))

    sq = np.sum((coords[:, None, :] - coords[None, :, :]) ** 2, axis=2)
    Q = np.where(sq <= radius**2 + 1e-12, np.exp(-sq / (2.0 * eta)), 0.0) / normalizer
    np.fill_diagonal(Q, 0.0)
    return Q


def metropolis_matrix(Q: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    """Q(x, y) min{1, p(y)/p(x)} off the diagonal, remainder on it."""
    log_ratio = log_p[None, :] - log_p[:, None]
    M = Q * np.exp(np.minimum(0.0, log_ratio))
    np.fill_diagonal(M, 0.0)
    np.fill_diagonal(M, 1.0 - M.sum(axis=1))
    return M


def _normalize_log(values: np.ndarray, axis: int = -1) -> Tuple[np.ndarray, np.ndarray]:
    log_mass = logsumexp(values, axis=axis, keepdims=True)
    return values - log_mass, np.squeeze(log_mass, axis=axis)


@dataclass(eq=False)
class DiscreteSTChain:
    """Tempering chain on levels x grid together with its mixture structure."""

    base: DiscreteChain
    core: np.ndarray  # non-lazy transition matrix
    target: GaussianMixtureTarget
    grid: GridSpec
    coords: np.ndarray
    betas: np.ndarray
    r: np.ndarray
    lam: float
    zeta: float
    eta: float
    kind: DensityKind
    level_log_density: np.ndarray  # (L, G), grid-normalized
    component_log_density: np.ndarray  # (L, n, G), grid-normalized
    component_weights: np.ndarray  # (L, n)
    proposal: np.ndarray = field(repr=False)
    radius: float = math.inf
    _component_chains: Dict[Tuple[int, int], np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def n_levels(self) -> int:
        return self.betas.size

    @property
    def n_components(self) -> int:
        return self.component_weights.shape[1]

    @property
    def n_grid(self) -> int:
        return self.coords.shape[0]

    @property
    def lazy(self) -> bool:
        return self.zeta > 0.0

    @property
    def grid_mask(self) -> np.ndarray:
        return np.linalg.norm(self.coords, axis=1) <= self.radius + 1e-12

    @property
    def mask(self) -> np.ndarray:
        return np.tile(self.grid_mask, self.n_levels)

    @property
    def level_density(self) -> np.ndarray:
        return np.exp(self.level_log_density)

    @property
    def component_density(self) -> np.ndarray:
        return np.exp(self.component_log_density)

    @property
    def component_masses(self) -> np.ndarray:
        """P_(i,j)(X0) for every level and component; shape (L, n)."""
        return self.component_density[:, :, self.grid_mask].sum(axis=2)

    @property
    def theta(self) -> float:
        """Stationary mass of levels x X0."""
        return float(self.exact_stationary()[self.mask].sum())

    @property
    def phi(self) -> float:
        return float(self.component_masses.min())

    def state_index(self, level: int, point: int) -> int:
        return (level - 1) * self.n_grid + point

    def exact_stationary(self) -> np.ndarray:
        """r_i p_i(x), flattened level-major."""
        return (self.r[:, None] * self.level_density).ravel()

    def level_chain(self, level: int) -> np.ndarray:
        """Metropolis chain M_i of one level (non-lazy)."""
        return metropolis_matrix(self.proposal, self.level_log_density[level - 1])

    def component_chain(self, level: int, component: int) -> np.ndarray:
        """Metropolis chain M_(i,j) with stationary p_(i,j) (non-lazy)."""
        key = (level, component)
        if key not in self._component_chains:
            self._component_chains[key] = metropolis_matrix(
                self.proposal, self.component_log_density[level - 1, component - 1]
            )
        return self._component_chains[key]

    def with_radius(self, radius: float) -> "DiscreteSTChain":
        """Same chain with the restriction set X0 = {|x| <= radius}."""
        if radius <= 0:
            raise ValueError("radius must be positive")
        return DiscreteSTChain(
            base=self.base, core=self.core, target=self.target, grid=self.grid,
            coords=self.coords, betas=self.betas, r=self.r, lam=self.lam,
            zeta=self.zeta, eta=self.eta, kind=self.kind,
            level_log_density=self.level_log_density,
            component_log_density=self.component_log_density,
            component_weights=self.component_weights,
            proposal=self.proposal, radius=radius,
            _component_chains=self._component_chains,
        )

    def smallest_radius(self, phi_floor: float) -> float:
        """Smallest grid-point norm R whose ball keeps every P_(i,j)(X0) >= phi_floor."""
        norms = np.linalg.norm(self.coords, axis=1)
        dens = self.component_density.reshape(-1, self.n_grid)
        for radius in np.unique(norms):
            if dens[:, norms <= radius + 1e-12].sum(axis=1).min() >= phi_floor:
                return float(radius)
        raise DegenerateRestrictionError(f"no radius reaches component mass {phi_floor} on this grid")


def _assemble(
    Q: np.ndarray,
    level_log_density: np.ndarray,
    log_r: np.ndarray,
    lam: float,
) -> np.ndarray:
    n_levels, n_grid = level_log_density.shape
    size = n_levels * n_grid
    P = np.zeros((size, size))
    for i in range(n_levels):
        block = slice(i * n_grid, (i + 1) * n_grid)
        local = metropolis_matrix(Q, level_log_density[i])
        np.fill_diagonal(local, 0.0)
        P[block, block] = (1.0 - lam) * local
        for k in (i - 1, i + 1):
            if not 0 <= k < n_levels:
                continue
            log_a = np.minimum(
                0.0,
                log_r[k] + level_log_density[k] - log_r[i] - level_log_density[i],
            )
            rows = np.arange(i * n_grid, (i + 1) * n_grid)
            P[rows, rows - i * n_grid + k * n_grid] = 0.5 * lam * np.exp(log_a)
    np.fill_diagonal(P, 0.0)
    np.fill_diagonal(P, 1.0 - P.sum(axis=1))
    return P


def discretize_st(
    target: GaussianMixtureTarget,
    betas: Sequence[float],
    grid: GridSpec,
    eta: float,
    lam: float,
    laziness: float = 0.0,
    r: Optional[Sequence[float]] = None,
    radius: float = math.inf,
    kind: DensityKind = "tilde",
) -> DiscreteSTChain:
    """Discrete analog of the tempering chain for a mixture target (d <= 2)."""
    if target.dim not in (1, 2):
        raise ValueError(f"grid chains support d in {{1, 2}}, got d={target.dim}")
    if not 0.0 < lam < 1.0:
        raise ValueError("lam must lie in (0, 1)")
    if not 0.0 <= laziness <= 0.5:
        raise ValueError("laziness must lie in [0, 1/2]")

    betas = np.asarray(betas, dtype=float)
    n_levels = betas.size
    n_grid = grid.points**target.dim
    if n_levels * n_grid > MAX_STATES:
        raise CapacityError(f"{n_levels} x {n_grid} states exceed the cap of {MAX_STATES}")

    r = np.full(n_levels, 1.0 / n_levels) if r is None else np.asarray(r, dtype=float)
    if r.shape != (n_levels,) or np.any(r <= 0) or abs(r.sum() - 1.0) > 1e-12:
        raise ValueError("level weights must be positive, one per level, summing to 1")

    coords = grid.coordinates(target.dim)
    # (G, n) quadratic forms, reused for every level
    quad = target.quadratic_forms(coords)
    comp_unnorm = -0.5 * betas[:, None, None] * quad.T[None, :, :]  # (L, n, G)
    comp_log, comp_log_mass = _normalize_log(comp_unnorm)
    log_w = target.log_weights[None, :] + comp_log_mass
    comp_weights = np.exp(log_w - logsumexp(log_w, axis=1, keepdims=True))

    if kind == "tilde":
        mixture = logsumexp(np.log(comp_weights)[:, :, None] + comp_log, axis=1)
        level_log, _ = _normalize_log(mixture)
    elif kind == "tempered":
        potentials = np.asarray(target.potential(coords))
        level_log, _ = _normalize_log(-betas[:, None] * potentials[None, :])
    else:
        raise ValueError(f"unknown density kind '{kind}'")

    Q = proposal_matrix(grid, target.dim, eta)
    core = _assemble(Q, level_log, np.log(r), lam)
    P = laziness * np.eye(core.shape[0]) + (1.0 - laziness) * core if laziness > 0 else core.copy()

    logger.debug(f"Discretized {kind} chain: L={n_levels}, grid={n_grid}, states={P.shape[0]}")
    return DiscreteSTChain(
        base=DiscreteChain(P),
        core=core,
        target=target,
        grid=grid,
        coords=coords,
        betas=betas,
        r=r,
        lam=lam,
        zeta=laziness,
        eta=eta,
        kind=kind,
        level_log_density=level_log,
        component_log_density=comp_log,
        component_weights=comp_weights,
        proposal=Q,
        radius=radius,
    )

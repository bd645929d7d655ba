"""Numerical checks of the decomposition theorem and the bounds it rests on.

C_M is evaluated as max{3 theta C3, theta C1 C2 ((2 + lam) C3 + 1) / (phi (1 - lam))}
without any trailing Dirichlet-form factor. For a lazy chain zeta I + (1 - zeta) M
every Dirichlet form scales by (1 - zeta), so the bound checked is (1 - zeta) / C_M.
"""

import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel

from app.errors import PathError
from app.kernels.variates import seed_sequence
from app.ladder.partition import log_partition
from app.spectral.chains import (
    DiscreteChain,
    dirichlet_form,
    restricted_spectral_gap,
    total_variation,
    variance_form,
)
from app.spectral.discretize import DiscreteSTChain
from app.spectral.projected import build_projected
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)

GAP_RTOL = 1e-9
# single-component targets sit exactly on the sandwich, so log Z must be far tighter than the slack tolerance
SANDWICH_QUAD_TOL = 1e-11


class DirichletReport(BaseModel):
    trials: int
    max_relative_error: float


class TheoremReport(BaseModel):
    lazy: bool
    gap: float
    C1: float
    C2: float
    C3: float
    theta: float
    phi: float
    C_M: float
    bound: float
    holds: bool
    local_gap_min: float
    local_gap_bound: Optional[float] = None
    local_gap_ok: Optional[bool] = None


class PathReport(BaseModel):
    rho: float
    trials: int
    worst_ratio: float
    holds: bool


class MixingReport(BaseModel):
    steps: int
    b_norm: float
    constant: float
    mass_ok: bool
    gap_ok: bool
    tv: float
    level_tv_max: float
    level_bound: float
    hypotheses_hold: bool
    holds: bool

    @property
    def ok(self) -> bool:
        """Conclusion holds, or is not claimed because a hypothesis fails."""
        return self.holds or not self.hypotheses_hold


def _rng(seed: int, key: Sequence[int]) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, key))


def _relative(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0.0 else abs(a - b) / scale


def stationarity_error(st: DiscreteSTChain) -> float:
    """L-infinity distance between the eigen-computed and the exact r_i p_i(x)."""
    return float(np.max(np.abs(st.base.pi - st.exact_stationary())))


def exact_chain(st: DiscreteSTChain, lazy: bool = True) -> DiscreteChain:
    """The grid chain paired with its exact stationary vector."""
    return DiscreteChain(st.base.P if lazy else st.core, pi=st.exact_stationary())


def verify_dirichlet_decomposition(
    st: DiscreteSTChain,
    trials: int = 100,
    seed: int = 0,
    functions: Optional[Sequence[np.ndarray]] = None,
) -> DirichletReport:
    """E = (1 - lam) sum_i r_i E_i + lam E^I on levels x X0, for random test functions."""
    if trials < 1 and functions is None:
        raise ValueError("trials must be >= 1")
    chain = exact_chain(st)
    mask = st.mask
    inside = st.grid_mask
    G, L = st.n_grid, st.n_levels
    p = st.level_density
    local = [DiscreteChain(st.level_chain(i), pi=p[i - 1]) for i in range(1, L + 1)]

    # r_i p_i(x) a((i,x),(i',x)) for each neighbouring pair, on X0
    swap: Dict[Tuple[int, int], np.ndarray] = {}
    for i in range(L):
        for k in (i - 1, i + 1):
            if 0 <= k < L:
                swap[(i, k)] = np.minimum(st.r[i] * p[i], st.r[k] * p[k])[inside]

    if functions is None:
        rng = _rng(seed, (4,))
        functions = [rng.standard_normal(L * G) for _ in range(trials)]

    worst = 0.0
    for g in functions:
        g = np.asarray(g, dtype=float)
        lhs = dirichlet_form(chain, g, mask)
        levels = g.reshape(L, G)
        within = sum(st.r[i] * dirichlet_form(local[i], levels[i], inside) for i in range(L))
        across = 0.25 * sum(
            float(np.sum((levels[i][inside] - levels[k][inside]) ** 2 * flow))
            for (i, k), flow in swap.items()
        )
        rhs = (1.0 - st.zeta) * ((1.0 - st.lam) * within + st.lam * across)
        worst = max(worst, _relative(lhs, rhs))

    return DirichletReport(trials=len(functions), max_relative_error=worst)


def local_gap_bound(target: GaussianMixtureTarget, eta: float, radius: float) -> Optional[float]:
    """gamma_min^(d/2) eta^(3/2) / (13 R^(d+3)); None unless eta <= R^2."""
    if not math.isfinite(radius) or eta > radius**2:
        return None
    d = target.dim
    return target.gamma_min ** (d / 2) * eta**1.5 / (13.0 * radius ** (d + 3))


def decomposition_constant(theta: float, phi: float, lam: float, c1: float, c2: float, c3: float) -> float:
    return max(3.0 * theta * c3, theta * c1 * c2 * ((2.0 + lam) * c3 + 1.0) / (phi * (1.0 - lam)))


def verify_decomposition_theorem(st: DiscreteSTChain, c3_scale: float = 1.0) -> TheoremReport:
    """Compare the exact restricted gap with 1/C_M built from exact local and projected gaps."""
    inside = st.grid_mask
    density = st.component_density

    local_gaps = []
    for i in range(1, st.n_levels + 1):
        for j in range(1, st.n_components + 1):
            local = DiscreteChain(st.component_chain(i, j), pi=density[i - 1, j - 1])
            local_gaps.append(restricted_spectral_gap(local, inside))
    local_min = min(local_gaps)
    c2 = 1.0 / local_min if local_min > 0 else math.inf

    projected = build_projected(st)
    if projected.size > 1:
        bar_gap = restricted_spectral_gap(DiscreteChain(projected.Mbar, pi=projected.Pbar))
        c3 = c3_scale / bar_gap if bar_gap > 0 else math.inf
    else:
        c3 = 0.0

    theta, phi = st.theta, st.phi
    c_m = decomposition_constant(theta, phi, st.lam, 1.0, c2, c3)
    gap = restricted_spectral_gap(exact_chain(st), st.mask)
    bound = (1.0 - st.zeta) / c_m if c_m > 0 else math.inf
    holds = gap >= bound * (1.0 - GAP_RTOL)

    radius = st.radius if math.isfinite(st.radius) else float(np.linalg.norm(st.coords, axis=1).max())
    aux = local_gap_bound(st.target, st.eta, radius)
    report = TheoremReport(
        lazy=st.lazy, gap=gap, C1=1.0, C2=c2, C3=c3, theta=theta, phi=phi,
        C_M=c_m, bound=bound, holds=holds, local_gap_min=local_min,
        local_gap_bound=aux, local_gap_ok=None if aux is None else local_min >= aux,
    )
    if not holds:
        logger.warning(f"Decomposition bound violated: gap={gap:.6g} < bound={bound:.6g}")
    return report


def verify_canonical_path_bound(
    chain: DiscreteChain,
    paths: Dict[Tuple[int, int], List[int]],
    trials: int = 100,
    seed: int = 0,
) -> PathReport:
    """Edge congestion rho of the path family and Var <= rho E on random functions."""
    P, pi = chain.P, chain.pi
    load: Dict[Tuple[int, int], float] = {}
    for (x, y), path in paths.items():
        if len(path) < 2 or path[0] != x or path[-1] != y:
            raise PathError(f"path for ({x}, {y}) does not connect its endpoints")
        weight = pi[x] * pi[y] * (len(path) - 1)
        for u, v in zip(path[:-1], path[1:]):
            if P[u, v] <= 0.0:
                raise PathError(f"path for ({x}, {y}) uses the zero-probability edge ({u}, {v})")
            load[(u, v)] = load.get((u, v), 0.0) + weight

    rho = max((w / (pi[u] * P[u, v]) for (u, v), w in load.items()), default=0.0)

    rng = _rng(seed, (5,))
    worst = 0.0
    holds = True
    for _ in range(trials):
        g = rng.standard_normal(chain.size)
        var = variance_form(pi, g)
        energy = dirichlet_form(chain, g)
        if var > rho * energy * (1.0 + 1e-10) + 1e-300:
            holds = False
        if rho * energy > 0:
            worst = max(worst, var / (rho * energy))
    return PathReport(rho=rho, trials=trials, worst_ratio=worst, holds=holds)


def verify_mixing_bound(
    st: DiscreteSTChain,
    epsilon: float = 0.1,
    start: Union[Literal["mode", "stationary"], np.ndarray] = "mode",
    constant: Optional[float] = None,
) -> MixingReport:
    """Iterate the exact distribution N = ceil(C log(2B^2/eps^2)) steps and measure TV."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    if np.min(np.diag(st.base.P)) < 0.5 - 1e-12:
        raise ValueError("mixing bound needs a lazy chain (holding probability >= 1/2)")

    pi = st.exact_stationary()
    mask = st.mask
    if isinstance(start, str):
        if start == "stationary":
            p0 = pi.copy()
        elif start == "mode":
            p0 = np.zeros_like(pi)
            p0[np.flatnonzero(mask)[np.argmax(pi[mask])]] = 1.0
        else:
            raise ValueError(f"unknown start '{start}'")
    else:
        p0 = np.asarray(start, dtype=float)
        if p0.shape != pi.shape or np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
            raise ValueError("start must be a probability vector over the chain states")

    support = p0 > 0
    b_norm = float(np.max(p0[support] / pi[support]))
    gap = restricted_spectral_gap(exact_chain(st), mask)
    if constant is None:
        constant = 1.0 / verify_decomposition_theorem(st).bound

    steps = max(0, math.ceil(constant * math.log(2.0 * b_norm**2 / epsilon**2)))
    pN = p0 @ np.linalg.matrix_power(st.base.P, steps)

    tv = total_variation(pN, pi)
    L, G = st.n_levels, st.n_grid
    by_level = pN.reshape(L, G)
    level_tvs = [
        total_variation(by_level[i] / by_level[i].sum(), st.level_density[i])
        for i in range(L)
        if by_level[i].sum() > 0
    ]
    level_tv_max = max(level_tvs, default=0.0)
    level_bound = 1.5 * epsilon / float(st.r.min())

    mass_ok = st.theta >= 1.0 - epsilon**2 / (20.0 * b_norm**2)
    gap_ok = gap >= (1.0 / constant) * (1.0 - GAP_RTOL)
    hypotheses = b_norm >= 1.0 and mass_ok and gap_ok
    if not hypotheses:
        logger.warning(
            f"Mixing hypotheses not met (B={b_norm:.3g}, mass_ok={mass_ok}, gap_ok={gap_ok}); "
            f"conclusion reported but not claimed"
        )
    return MixingReport(
        steps=steps, b_norm=b_norm, constant=constant, mass_ok=mass_ok, gap_ok=gap_ok,
        tv=tv, level_tv_max=level_tv_max, level_bound=level_bound,
        hypotheses_hold=hypotheses,
        holds=tv <= epsilon and level_tv_max <= level_bound,
    )


def density_sandwich_slack(target: GaussianMixtureTarget, beta: float, points: np.ndarray) -> float:
    """min over points of the slack in w_min p_tilde <= p <= p_tilde / w_min (normalized, log domain)."""
    d = target.dim
    log_z = log_partition(target, beta, rel_tol=SANDWICH_QUAD_TOL)
    log_z_tilde = 0.5 * d * math.log(2.0 * math.pi / beta) + float(np.sum(np.log(np.diag(target.chol))))
    log_p = -beta * np.asarray(target.potential(points)) - log_z
    log_tilde = np.asarray(target.tilde_log_density_unnorm(beta, points)) - log_z_tilde
    return _sandwich_slack(log_p - log_tilde, target.w_min)


def grid_sandwich_slack(tilde: DiscreteSTChain, tempered: DiscreteSTChain) -> float:
    """Same sandwich for the grid-renormalized level densities of two chains."""
    diff = tempered.level_log_density - tilde.level_log_density
    return _sandwich_slack(diff, tilde.target.w_min)


def _sandwich_slack(log_ratio: np.ndarray, w_min: float) -> float:
    log_w = math.log(w_min)
    return float(min(np.min(log_ratio - log_w), np.min(-log_w - log_ratio)))


def gap_ratio_ok(tilde: DiscreteSTChain, tempered: DiscreteSTChain) -> bool:
    """gap(M_tilde) <= w_min^-5 gap(M_star) for the restricted gaps on levels x X0."""
    g_tilde = restricted_spectral_gap(exact_chain(tilde), tilde.mask)
    g_star = restricted_spectral_gap(exact_chain(tempered), tempered.mask)
    return g_tilde <= tilde.target.w_min ** -5 * g_star * (1.0 + GAP_RTOL)

"""Simulated tempering Metropolis-Hastings (single chain).

A step either holds (lazy version), moves the position by RWMH at the
current inverse temperature, or proposes a neighbouring level whose
acceptance uses only the estimated normalizing constants:

    log a = min{0, (beta_i - beta_i') f(x) + log Zhat_i - log Zhat_i'}

Levels are 1-based throughout.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from app.errors import StateError
from app.kernels.metropolis import accepts
from app.kernels.variates import ACCEPT, DIRECTION, LAZY, MOVE, VariateStream
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

if TYPE_CHECKING:
    from app.ladder.schedule import Ladder

logger = get_logger(__name__)

# spawn_key namespace of single-chain sampling streams
SAMPLE_STREAM = 0


@dataclass(frozen=True)
class STState:
    level: int
    x: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if x.ndim != 1:
            raise ValueError(f"position must be a vector, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("position must be finite")
        if self.level < 1:
            raise ValueError(f"level must be >= 1, got {self.level}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "x", x)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, STState):
            return NotImplemented
        return self.level == other.level and np.array_equal(self.x, other.x)


@dataclass(frozen=True)
class TemperingKernel:
    """Vectorized transition rule over any number of independent chains."""

    target: GaussianMixtureTarget
    betas: np.ndarray
    log_zhat: np.ndarray
    lam: float
    eta: float
    zeta: float = 0.0

    @property
    def n_levels(self) -> int:
        return len(self.betas)

    @property
    def dim(self) -> int:
        return self.target.dim

    def advance(
        self,
        levels: np.ndarray,
        xs: np.ndarray,
        fx: np.ndarray,
        u: np.ndarray,
        z: np.ndarray,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """One step for every row; fx caches f at the current positions."""
        levels, xs, fx = levels.copy(), xs.copy(), fx.copy()

        hold = u[:, LAZY] < self.zeta
        level_move = ~hold & (u[:, MOVE] < self.lam)
        position_move = ~hold & ~level_move

        idx = np.flatnonzero(position_move)
        if idx.size:
            y = xs[idx] + np.sqrt(self.eta) * z[idx]
            fy = np.asarray(self.target.potential(y))
            beta = self.betas[levels[idx] - 1]
            with np.errstate(invalid="ignore"):
                log_a = -beta * (fy - fx[idx])
            ok = accepts(u[idx, ACCEPT], log_a)
            moved = idx[ok]
            xs[moved] = y[ok]
            fx[moved] = fy[ok]

        jdx = np.flatnonzero(level_move)
        if jdx.size:
            current = levels[jdx]
            proposal = current + np.where(u[jdx, DIRECTION] < 0.5, -1, 1)
            inside = (proposal >= 1) & (proposal <= self.n_levels)
            target_level = np.clip(proposal, 1, self.n_levels)
            log_a = (
                (self.betas[current - 1] - self.betas[target_level - 1]) * fx[jdx]
                + self.log_zhat[current - 1]
                - self.log_zhat[target_level - 1]
            )
            ok = inside & accepts(u[jdx, ACCEPT], log_a)
            levels[jdx[ok]] = proposal[ok]

        return levels, xs, fx

    def level_log_acceptance(self, level: int, proposal: int, x: np.ndarray) -> float:
        """log a((i, x), (i', x)); -inf for proposals outside [1, L]."""
        if not 1 <= proposal <= self.n_levels:
            return -np.inf
        f = float(self.target.potential(np.asarray(x, dtype=float)))
        log_a = (
            (self.betas[level - 1] - self.betas[proposal - 1]) * f
            + self.log_zhat[level - 1]
            - self.log_zhat[proposal - 1]
        )
        return min(0.0, float(log_a))


@dataclass(frozen=True)
class STConfig:
    target: GaussianMixtureTarget
    ladder: "Ladder"
    lam: float
    eta: float
    lazy: bool = False
    laziness: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"level-move probability must lie in (0, 1), got {self.lam}")
        if self.eta <= 0:
            raise ValueError(f"step size eta must be positive, got {self.eta}")
        if not 0.0 <= self.laziness <= 0.5:
            raise ValueError(f"laziness must lie in [0, 1/2], got {self.laziness}")

    @property
    def zeta(self) -> float:
        return self.laziness if self.lazy else 0.0

    @cached_property
    def kernel(self) -> TemperingKernel:
        return TemperingKernel(
            target=self.target,
            betas=np.asarray(self.ladder.betas, dtype=float),
            log_zhat=np.asarray(self.ladder.log_zhat, dtype=float),
            lam=self.lam,
            eta=self.eta,
            zeta=self.zeta,
        )

    def stream(self, replicate: int = 0) -> VariateStream:
        return VariateStream(self.seed, (SAMPLE_STREAM, replicate), self.target.dim)


def _checked_potential(target: GaussianMixtureTarget, x: np.ndarray) -> float:
    f = float(target.potential(x))
    if not np.isfinite(f):
        raise StateError(f"potential is not finite at the starting point ({f})")
    return f


def _check_state(state: STState, cfg: STConfig) -> None:
    if state.level > cfg.kernel.n_levels:
        raise ValueError(f"level {state.level} outside ladder of {cfg.kernel.n_levels} levels")
    if state.x.shape != (cfg.target.dim,):
        raise ValueError(f"position has shape {state.x.shape}, expected ({cfg.target.dim},)")


def st_step(state: STState, cfg: STConfig, stream: VariateStream) -> STState:
    """One simulated-tempering transition."""
    _check_state(state, cfg)
    fx = _checked_potential(cfg.target, state.x)
    u, z = stream.next()
    levels, xs, _ = cfg.kernel.advance(
        np.array([state.level]), state.x[None, :], np.array([fx]), u[None, :], z[None, :]
    )
    return STState(int(levels[0]), xs[0])


def _iterate(
    cfg: STConfig,
    x0: np.ndarray,
    i0: int,
    n_steps: int,
    stream: VariateStream,
    record_every: Optional[int],
) -> Tuple[STState, List[STState]]:
    if n_steps < 0:
        raise ValueError("number of steps must be >= 0")
    state = STState(i0, x0)
    _check_state(state, cfg)

    kernel = cfg.kernel
    levels = np.array([state.level])
    xs = state.x[None, :].copy()
    fx = np.array([_checked_potential(cfg.target, state.x)])
    trace: List[STState] = []

    done = 0
    while done < n_steps:
        us, zs = stream.take(min(stream.chunk, n_steps - done))
        for t in range(us.shape[0]):
            levels, xs, fx = kernel.advance(levels, xs, fx, us[t:t + 1], zs[t:t + 1])
            done += 1
            if record_every is not None and done % record_every == 0:
                trace.append(STState(int(levels[0]), xs[0].copy()))

    return STState(int(levels[0]), xs[0]), trace


def run_chain(
    cfg: STConfig,
    x0: np.ndarray,
    i0: int,
    n_steps: int,
    stream: Optional[VariateStream] = None,
    replicate: int = 0,
) -> STState:
    """Iterate st_step n_steps times from (i0, x0) and return the final state."""
    stream = stream if stream is not None else cfg.stream(replicate)
    final, _ = _iterate(cfg, x0, i0, n_steps, stream, record_every=None)
    return final


def run_chain_traced(
    cfg: STConfig,
    x0: np.ndarray,
    i0: int,
    n_steps: int,
    stream: Optional[VariateStream] = None,
    record_every: int = 1,
    replicate: int = 0,
) -> List[STState]:
    """Like run_chain, recording the state after every record_every-th step."""
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    stream = stream if stream is not None else cfg.stream(replicate)
    _, trace = _iterate(cfg, x0, i0, n_steps, stream, record_every=record_every)
    return trace

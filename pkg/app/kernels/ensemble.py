"""Many independent tempering chains advanced in lockstep.

Each row owns its VariateStream, so row r follows exactly the trajectory
run_chain would produce from the same stream; rows only share the numpy
calls.
"""

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from app.errors import StateError
from app.kernels.tempering import TemperingKernel
from app.kernels.variates import VariateStream

StepObserver = Callable[[int, "EnsembleState"], None]


@dataclass
class EnsembleState:
    levels: np.ndarray
    xs: np.ndarray
    fx: np.ndarray

    @property
    def size(self) -> int:
        return self.levels.shape[0]


def init_ensemble(kernel: TemperingKernel, x0s: np.ndarray, levels0: Sequence[int]) -> EnsembleState:
    xs = np.atleast_2d(np.asarray(x0s, dtype=float)).copy()
    levels = np.asarray(levels0, dtype=int).copy()
    if xs.shape[1] != kernel.dim:
        raise ValueError(f"start points have dimension {xs.shape[1]}, expected {kernel.dim}")
    if levels.shape != (xs.shape[0],):
        raise ValueError("one start level per start point is required")
    if levels.min() < 1 or levels.max() > kernel.n_levels:
        raise ValueError(f"start levels must lie in [1, {kernel.n_levels}]")
    fx = np.asarray(kernel.target.potential(xs), dtype=float)
    if not np.all(np.isfinite(fx)):
        raise StateError("potential is not finite at a starting point")
    return EnsembleState(levels, xs, fx)


def run_ensemble(
    kernel: TemperingKernel,
    state: EnsembleState,
    streams: Sequence[VariateStream],
    n_steps: int,
    observer: Optional[StepObserver] = None,
) -> EnsembleState:
    """Advance every row n_steps times; observer(step, state) sees each step."""
    if len(streams) != state.size:
        raise ValueError(f"{len(streams)} streams for {state.size} chains")
    if n_steps < 0:
        raise ValueError("number of steps must be >= 0")

    chunk = min((s.chunk for s in streams), default=1)
    done = 0
    while done < n_steps:
        width = min(chunk, n_steps - done)
        drawn = [s.take(width) for s in streams]
        us = np.stack([d[0] for d in drawn], axis=1)  # (width, k, 4)
        zs = np.stack([d[1] for d in drawn], axis=1)  # (width, k, d)
        for t in range(width):
            state.levels, state.xs, state.fx = kernel.advance(
                state.levels, state.xs, state.fx, us[t], zs[t]
            )
            done += 1
            if observer is not None:
                observer(done, state)
    return state

"""Replicate simulation for the scaling and accuracy studies.

Replicates are cut into blocks of fixed size; each block advances its chains
in lockstep with one variate stream per replicate, keyed

    (EXPERIMENT_STREAM, study, algorithm, target index, replicate)

so every table cell is the same for any thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Literal, Sequence

import numpy as np
from pydantic import BaseModel

from app.kernels.ensemble import init_ensemble, run_ensemble
from app.kernels.tempering import TemperingKernel
from app.kernels.variates import VariateStream
from app.utils.logging import get_logger

logger = get_logger(__name__)

EXPERIMENT_STREAM = 2
ALGORITHMS = ("stmh", "mh")

Algorithm = Literal["stmh", "mh"]


class ExperimentRecord(BaseModel):
    """Final summary of one replicate."""

    replicate: int
    algorithm: Algorithm
    D: float
    steps: int
    mean: List[float]
    mean_norm: float
    top_samples: int
    occupancy: List[float]


@dataclass
class Trajectories:
    """Per-replicate running means of the level-L samples at recorded steps."""

    steps: np.ndarray  # (T,)
    means: np.ndarray  # (T, R, d), NaN before the first level-L sample
    counts: np.ndarray  # (T, R)
    records: List[ExperimentRecord]


def record_steps(max_steps: int, record_every: int) -> np.ndarray:
    return np.arange(record_every, max_steps + 1, record_every)


def _run_block(
    kernel: TemperingKernel,
    keys: Sequence[tuple],
    seed: int,
    start: np.ndarray,
    level0: int,
    steps: np.ndarray,
):
    count = len(keys)
    dim, top = kernel.dim, kernel.n_levels
    streams = [VariateStream(seed, key, dim) for key in keys]
    state = init_ensemble(kernel, np.tile(start, (count, 1)), np.full(count, level0))

    sums = np.zeros((count, dim))
    hits = np.zeros(count, dtype=np.int64)
    visits = np.zeros((count, top), dtype=np.int64)
    rec_sums = np.zeros((steps.size, count, dim))
    rec_hits = np.zeros((steps.size, count), dtype=np.int64)
    next_record = [0]

    def observe(step: int, st) -> None:
        at_top = st.levels == top
        sums[at_top] += st.xs[at_top]
        hits[at_top] += 1
        visits[np.arange(count), st.levels - 1] += 1
        k = next_record[0]
        if k < steps.size and step == steps[k]:
            rec_sums[k] = sums
            rec_hits[k] = hits
            next_record[0] = k + 1

    run_ensemble(kernel, state, streams, int(steps[-1]) if steps.size else 0, observer=observe)
    return rec_sums, rec_hits, visits


def simulate(
    kernel: TemperingKernel,
    algorithm: Algorithm,
    separation: float,
    replicates: int,
    max_steps: int,
    record_every: int,
    start: Sequence[float],
    level0: int,
    block_size: int,
    seed: int,
    key_prefix: Sequence[int],
    threads: int = 1,
) -> Trajectories:
    """Run `replicates` chains and collect their level-L running means."""
    steps = record_steps(max_steps, record_every)
    start = np.asarray(start, dtype=float)
    level0 = min(level0, kernel.n_levels)
    blocks = [
        [tuple(key_prefix) + (r,) for r in range(first, min(first + block_size, replicates))]
        for first in range(0, replicates, block_size)
    ]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda keys: _run_block(kernel, keys, seed, start, level0, steps), blocks))

    sums = np.concatenate([r[0] for r in results], axis=1)
    hits = np.concatenate([r[1] for r in results], axis=1)
    visits = np.concatenate([r[2] for r in results], axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(hits[:, :, None] > 0, sums / hits[:, :, None], np.nan)

    records = []
    final_step = int(steps[-1]) if steps.size else 0
    for r in range(replicates):
        final_mean = means[-1, r] if steps.size else np.full(kernel.dim, np.nan)
        occupancy = visits[r] / max(final_step, 1)
        records.append(
            ExperimentRecord(
                replicate=r,
                algorithm=algorithm,
                D=separation,
                steps=final_step,
                mean=final_mean.tolist(),
                mean_norm=float(np.linalg.norm(final_mean)),
                top_samples=int(hits[-1, r]) if steps.size else 0,
                occupancy=occupancy.tolist(),
            )
        )

    logger.debug(f"{algorithm} D={separation:g}: {replicates} replicates x {final_step} steps done")
    return Trajectories(steps=steps, means=means, counts=hits, records=records)

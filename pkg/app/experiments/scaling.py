"""Steps-to-threshold and accuracy studies on the symmetric two-mode target.

Both studies compare simulated tempering ("stmh") with plain random-walk
Metropolis at beta = 1 ("mh"), started from a fixed point far from both modes.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from app.config import EstimationSection, ExperimentSection
from app.errors import ConfigError
from app.experiments.analysis import accuracy_rows, crossing_row, summarize_means
from app.experiments.replicates import ALGORITHMS, EXPERIMENT_STREAM, ExperimentRecord, simulate
from app.kernels.tempering import TemperingKernel
from app.ladder.partition import estimate_partitions, quadrature_ladder
from app.ladder.schedule import Ladder, practical_schedule
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)

SCALING_STUDY = 0
ACCURACY_STUDY = 1

SCALING_COLUMNS = ["algorithm", "D", "D_squared", "crossing_N", "lo95_N", "hi95_N", "censored"]
ACCURACY_COLUMNS = ["algorithm", "D", "N", "mean_norm", "log2_inv_norm", "lo95", "hi95", "skipped"]


@dataclass
class ExperimentResult:
    table: pd.DataFrame
    records: pd.DataFrame


def _ladder(
    target: GaussianMixtureTarget,
    cfg: ExperimentSection,
    estimation: EstimationSection,
    seed: int,
    threads: int,
) -> Ladder:
    schedule = practical_schedule(target, cfg.levels, lam=cfg.lam, eta=cfg.eta)
    if cfg.zhat_source == "quadrature":
        return quadrature_ladder(target, schedule.betas)
    return estimate_partitions(
        target,
        schedule,
        samples=estimation.samples,
        run_steps=estimation.run_steps,
        restart_cap=estimation.restart_cap,
        seed=seed,
        batch=estimation.batch,
        threads=threads,
    )


def build_kernels(
    target: GaussianMixtureTarget,
    cfg: ExperimentSection,
    estimation: EstimationSection,
    seed: int = 0,
    threads: int = 1,
) -> Dict[str, TemperingKernel]:
    """The tempering kernel and the single-level baseline for one target."""
    ladder = _ladder(target, cfg, estimation, seed, threads)
    return {
        "stmh": TemperingKernel(
            target=target,
            betas=np.asarray(ladder.betas, dtype=float),
            log_zhat=np.asarray(ladder.log_zhat, dtype=float),
            lam=cfg.lam,
            eta=cfg.eta,
        ),
        # lam = 0: every step is a position move at beta = 1
        "mh": TemperingKernel(
            target=target,
            betas=np.array([1.0]),
            log_zhat=np.array([0.0]),
            lam=0.0,
            eta=cfg.eta,
        ),
    }


def _check(cfg: ExperimentSection) -> None:
    if cfg.levels is None:
        raise ConfigError("experiment.levels is required for the simulation study")
    if cfg.record_every > cfg.max_steps:
        raise ConfigError("experiment.record_every must not exceed experiment.max_steps")


def _run(
    cfg: ExperimentSection,
    estimation: EstimationSection,
    study: int,
    d_index: int,
    separation: float,
    seed: int,
    threads: int,
):
    target = GaussianMixtureTarget.symmetric_pair(separation, dim=len(cfg.start))
    kernels = build_kernels(target, cfg, estimation, seed=seed, threads=threads)
    for a, algorithm in enumerate(ALGORITHMS):
        kernel = kernels[algorithm]
        logger.info(
            f"{algorithm} D={separation:g}: L={kernel.n_levels}, {cfg.replicates} replicates, "
            f"{cfg.max_steps} steps"
        )
        yield algorithm, simulate(
            kernel,
            algorithm,
            separation,
            replicates=cfg.replicates,
            max_steps=cfg.max_steps,
            record_every=cfg.record_every,
            start=cfg.start,
            level0=cfg.level0,
            block_size=cfg.block_size,
            seed=seed,
            key_prefix=(EXPERIMENT_STREAM, study, a, d_index),
            threads=threads,
        )


def records_frame(records: List[ExperimentRecord]) -> pd.DataFrame:
    """One row per replicate; vector fields are spread over numbered columns."""
    rows = []
    for rec in records:
        row = rec.model_dump(exclude={"mean", "occupancy"})
        row.update({f"mean_{k + 1}": v for k, v in enumerate(rec.mean)})
        row.update({f"occupancy_{k + 1}": v for k, v in enumerate(rec.occupancy)})
        rows.append(row)
    return pd.DataFrame(rows)


def run_scaling_experiment(
    cfg: ExperimentSection,
    estimation: Optional[EstimationSection] = None,
    seed: int = 0,
    threads: int = 1,
) -> ExperimentResult:
    """First step at which the cross-replicate mean norm drops below the threshold, per D."""
    _check(cfg)
    estimation = estimation or EstimationSection()
    rows, records = [], []
    for d_index, separation in enumerate(cfg.separations):
        for algorithm, traj in _run(cfg, estimation, SCALING_STUDY, d_index, separation, seed, threads):
            summary = summarize_means(traj.steps, traj.means)
            rows.append(crossing_row(algorithm, separation, summary, cfg.threshold))
            records.extend(traj.records)
    table = pd.DataFrame(rows, columns=SCALING_COLUMNS)
    table["crossing_N"] = table["crossing_N"].astype("Int64")
    table["lo95_N"] = table["lo95_N"].astype("Int64")
    table["hi95_N"] = table["hi95_N"].astype("Int64")
    return ExperimentResult(table=table, records=records_frame(records))


def run_accuracy_experiment(
    cfg: ExperimentSection,
    estimation: Optional[EstimationSection] = None,
    seed: int = 0,
    threads: int = 1,
) -> ExperimentResult:
    """Mean norm and log^2(1/norm) at every recorded step for one separation."""
    _check(cfg)
    estimation = estimation or EstimationSection()
    rows, records = [], []
    for algorithm, traj in _run(cfg, estimation, ACCURACY_STUDY, 0, cfg.accuracy_separation, seed, threads):
        rows.extend(accuracy_rows(algorithm, cfg.accuracy_separation, summarize_means(traj.steps, traj.means)))
        records.extend(traj.records)
    return ExperimentResult(table=pd.DataFrame(rows, columns=ACCURACY_COLUMNS), records=records_frame(records))

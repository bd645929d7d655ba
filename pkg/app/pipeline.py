"""Study pipeline: resolves a config into targets, ladders and runs."""

from typing import Dict, Optional

import numpy as np
import pandas as pd

from app.config import StudyConfig
from app.errors import ConfigError, NumericError
from app.experiments.analysis import fit_summary
from app.experiments.scaling import run_accuracy_experiment, run_scaling_experiment
from app.kernels.tempering import SAMPLE_STREAM, STConfig, run_chain_traced
from app.kernels.variates import initial_point
from app.ladder.partition import estimate_partitions, quadrature_ladder, true_level_weights
from app.ladder.schedule import Ladder, ScheduleConstants, ScheduleParams, practical_schedule, theory_schedule
from app.spectral.suite import instance_radius_sweep, run_verification_suite
from app.target.mixture import GaussianMixtureTarget
from app.utils.logging import get_logger

logger = get_logger(__name__)


class StudyPipeline:
    """Runs one CLI command against a resolved configuration."""

    def __init__(self, config: StudyConfig, threads: int = 1, source: Optional[str] = None):
        self.config = config
        self.threads = threads
        self.source = source

    @property
    def seed(self) -> int:
        return self.config.seed

    def target(self) -> GaussianMixtureTarget:
        self.config.require("target", source=self.source)
        try:
            return self.config.target.build()
        except ValueError as e:
            raise ConfigError(f"target: {e}", path=self.source) from e

    def schedule(self, target: GaussianMixtureTarget) -> ScheduleParams:
        self.config.require("schedule", source=self.source)
        section = self.config.schedule
        constants = ScheduleConstants(
            beta_constant=section.beta_constant,
            sigma_constant=section.sigma_constant,
            steps_constant=section.steps_constant,
            steps_exponent=section.steps_exponent,
        )
        kwargs = dict(
            epsilon=section.epsilon,
            constants=constants,
            lam=section.lam,
            eta=section.eta,
            sigma0_sq=section.sigma0_sq,
        )
        if section.mode == "theory":
            return theory_schedule(target, **kwargs)
        return practical_schedule(target, section.levels, **kwargs)

    def estimate_ladder(self, target: GaussianMixtureTarget, schedule: ScheduleParams) -> Ladder:
        est = self.config.estimation
        return estimate_partitions(
            target,
            schedule,
            samples=est.samples,
            run_steps=est.run_steps,
            restart_cap=est.restart_cap,
            seed=self.seed,
            batch=est.batch,
            threads=self.threads,
        )

    def ladder(self, target: GaussianMixtureTarget, schedule: ScheduleParams) -> Ladder:
        if self.config.sampler.zhat_source == "quadrature":
            return quadrature_ladder(target, schedule.betas)
        return self.estimate_ladder(target, schedule)

    def sample(self, steps: Optional[int] = None) -> pd.DataFrame:
        """Initial state plus every record_every-th state: columns step, level, x1..xd."""
        sampler = self.config.sampler
        target = self.target()
        schedule = self.schedule(target)
        ladder = self.ladder(target, schedule)
        n_steps = sampler.steps if steps is None else steps
        if n_steps < 0:
            raise ConfigError("sampler.steps must be >= 0", path=self.source)
        if sampler.level0 > ladder.n_levels:
            raise ConfigError(
                f"sampler.level0={sampler.level0} exceeds the {ladder.n_levels}-level ladder", path=self.source
            )

        if sampler.x0 is not None:
            if len(sampler.x0) != target.dim:
                raise ConfigError(f"sampler.x0 must have length {target.dim}", path=self.source)
            x0 = np.asarray(sampler.x0, dtype=float)
        else:
            x0 = initial_point(self.seed, (SAMPLE_STREAM, 0), target.dim, schedule.sigma0_sq)

        cfg = STConfig(
            target=target,
            ladder=ladder,
            lam=schedule.lam,
            eta=schedule.eta,
            lazy=sampler.lazy,
            laziness=sampler.laziness,
            seed=self.seed,
        )
        logger.info(f"Sampling {n_steps} steps on a {ladder.n_levels}-level ladder (eta={schedule.eta:.4g})")
        trace = run_chain_traced(cfg, x0, sampler.level0, n_steps, record_every=sampler.record_every)

        rows = [(0, sampler.level0, *x0)]
        rows += [((k + 1) * sampler.record_every, s.level, *s.x) for k, s in enumerate(trace)]
        columns = ["step", "level"] + [f"x{k + 1}" for k in range(target.dim)]
        frame = pd.DataFrame(rows, columns=columns)

        if trace:
            top = float(np.mean([s.level == ladder.n_levels for s in trace]))
            logger.info(f"Level-{ladder.n_levels} occupancy of recorded states: {top:.4f}")
        return frame

    def estimate_z(self) -> pd.DataFrame:
        """Ladder file rows (i, beta, log_zhat) from sequential estimation."""
        target = self.target()
        ladder = self.estimate_ladder(target, self.schedule(target))
        if ladder.n_levels > 1:
            try:
                r = true_level_weights(target, ladder.betas, ladder.log_zhat)
                logger.info(f"Level weights implied by the estimates: min={r.min():.4g} max={r.max():.4g}")
            except (NumericError, ValueError) as e:
                logger.warning(f"Could not evaluate level weights by quadrature: {e}")
        return pd.DataFrame(
            {
                "i": np.arange(1, ladder.n_levels + 1),
                "beta": ladder.betas,
                "log_zhat": ladder.log_zhat,
            }
        )

    def verify(self) -> pd.DataFrame:
        return run_verification_suite(self.config.verify, seed=self.seed, threads=self.threads)

    def radius_sweep(self) -> pd.DataFrame:
        """C2 and C3 of the first verification instance as the restriction radius grows."""
        return instance_radius_sweep(self.config.verify, seed=self.seed)

    def experiment(self) -> Dict[str, pd.DataFrame]:
        """scaling / accuracy tables, their fits and per-replicate records, by file stem."""
        section = self.config.experiment
        if section.levels is None:
            raise ConfigError("experiment.levels is required", path=self.source)
        frames: Dict[str, pd.DataFrame] = {}
        records = []
        if section.kind in ("scaling", "both"):
            result = run_scaling_experiment(section, self.config.estimation, seed=self.seed, threads=self.threads)
            frames["scaling"] = result.table
            records.append(result.records.assign(study="scaling"))
        if section.kind in ("accuracy", "both"):
            result = run_accuracy_experiment(section, self.config.estimation, seed=self.seed, threads=self.threads)
            frames["accuracy"] = result.table
            records.append(result.records.assign(study="accuracy"))
        frames["fits"] = fit_summary(frames.get("scaling"), frames.get("accuracy"), horizon=section.max_steps)
        frames["replicates"] = pd.concat(records, ignore_index=True)
        return frames

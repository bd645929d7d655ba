"""Configuration management for the tempering lab."""

import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.errors import ConfigError
from app.target.mixture import GaussianMixtureTarget

# Load environment variables from .env file
load_dotenv()


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TargetSection(Section):
    dim: int = 2
    means: List[List[float]] = Field(default_factory=list)
    covariance: Union[Literal["identity"], List[List[float]]] = "identity"
    weights: Optional[List[float]] = None  # None -> uniform
    separation: Optional[float] = None  # symmetric two-mode target when means are omitted

    @model_validator(mode="after")
    def _check_shapes(self) -> "TargetSection":
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.means and self.separation is None:
            raise ValueError("either means or separation must be given")
        if self.means:
            for k, mean in enumerate(self.means):
                if len(mean) != self.dim:
                    raise ValueError(f"means[{k}] has length {len(mean)}, expected dim={self.dim}")
            if self.weights is not None and len(self.weights) != len(self.means):
                raise ValueError(f"{len(self.weights)} weights for {len(self.means)} means")
        if isinstance(self.covariance, list):
            if len(self.covariance) != self.dim or any(len(row) != self.dim for row in self.covariance):
                raise ValueError(f"covariance must be a {self.dim}x{self.dim} matrix")
        return self

    def build(self) -> GaussianMixtureTarget:
        """Construct the mixture; shape errors surface as ValueError."""
        if not self.means:
            target = GaussianMixtureTarget.symmetric_pair(self.separation, dim=self.dim)
            if self.covariance == "identity":
                return target
            return GaussianMixtureTarget(target.means, self.covariance, target.weights)

        n = len(self.means)
        cov = [[float(i == j) for j in range(self.dim)] for i in range(self.dim)]
        if isinstance(self.covariance, list):
            cov = self.covariance
        weights = self.weights if self.weights is not None else [1.0 / n] * n
        return GaussianMixtureTarget(means=self.means, covariance=cov, weights=weights)


class ScheduleSection(Section):
    mode: Literal["practical", "theory"] = "practical"
    levels: Optional[int] = None
    epsilon: float = Field(0.1, gt=0.0, lt=1.0)
    lam: float = Field(0.5, gt=0.0, lt=1.0)
    eta: Optional[float] = Field(None, gt=0.0)
    sigma0_sq: Optional[float] = Field(None, gt=0.0)
    beta_constant: float = Field(1.0, gt=0.0)
    sigma_constant: float = Field(1.0, gt=0.0)
    steps_constant: float = Field(1.0, gt=0.0)
    steps_exponent: float = 1.0

    @model_validator(mode="after")
    def _levels_for_practical(self) -> "ScheduleSection":
        if self.mode == "practical" and self.levels is None:
            raise ValueError("levels is required when mode is 'practical'")
        if self.levels is not None and self.levels < 1:
            raise ValueError("levels must be >= 1")
        return self


class SamplerSection(Section):
    steps: int = Field(1000, ge=0)
    x0: Optional[List[float]] = None  # None -> x0 ~ N(0, sigma0^2 I)
    level0: int = Field(1, ge=1)
    record_every: int = Field(1, ge=1)
    zhat_source: Literal["quadrature", "estimate"] = "quadrature"
    lazy: bool = False
    laziness: float = Field(0.5, ge=0.0, le=0.5)


class EstimationSection(Section):
    samples: int = Field(20, ge=1)
    run_steps: int = Field(200, ge=0)
    restart_cap: Optional[int] = Field(None, ge=1)
    batch: int = Field(16, ge=1)


class ExperimentSection(Section):
    kind: Literal["scaling", "accuracy", "both"] = "both"
    separations: List[float] = Field(default_factory=lambda: [8.0, 12.0, 16.0, 20.0])
    accuracy_separation: float = Field(16.0, ge=0.0)
    replicates: int = Field(500, ge=1)
    threshold: float = Field(0.1, gt=0.0)
    levels: Optional[int] = Field(None, ge=1)
    lam: float = Field(0.5, gt=0.0, lt=1.0)
    eta: float = Field(1.0, gt=0.0)
    max_steps: int = Field(20000, ge=1)
    record_every: int = Field(50, ge=1)
    start: Tuple[float, float] = (10.0, 10.0)
    level0: int = Field(1, ge=1)
    block_size: int = Field(100, ge=1)
    zhat_source: Literal["quadrature", "estimate"] = "quadrature"


class VerifySection(Section):
    instances: int = Field(20, ge=1)
    grid_points: int = Field(64, ge=2)
    extent: float = Field(12.0, gt=0.0)
    level_choices: List[int] = Field(default_factory=lambda: [2, 3])
    components: int = Field(2, ge=1)
    mean_range: float = Field(3.0, ge=0.0)
    variance_range: Tuple[float, float] = (0.5, 1.5)
    min_weight: float = Field(0.2, gt=0.0, le=1.0)
    lam: float = Field(1.0 / 3.0, gt=0.0, lt=1.0)
    laziness: float = Field(0.5, ge=0.0, le=0.5)
    eta: float = Field(1.0, gt=0.0)
    radius: Optional[float] = Field(None, gt=0.0)
    phi_floor: float = Field(0.75, gt=0.0, le=1.0)
    epsilon: float = Field(0.1, gt=0.0, lt=1.0)
    dirichlet_trials: int = Field(100, ge=1)
    path_trials: int = Field(100, ge=1)
    sandwich_points: int = Field(1000, ge=1)
    c3_scale: float = Field(1.0, gt=0.0)
    sweep_points: int = Field(6, ge=0)

    @model_validator(mode="after")
    def _check_ranges(self) -> "VerifySection":
        if not self.level_choices or min(self.level_choices) < 1:
            raise ValueError("level_choices must list positive level counts")
        if self.components * self.min_weight > 1.0 + 1e-12:
            raise ValueError(f"min_weight {self.min_weight} is infeasible for {self.components} components")
        lo, hi = self.variance_range
        if not (0.0 < lo <= hi):
            raise ValueError("variance_range must satisfy 0 < low <= high")
        return self


class StudyConfig(Section):
    seed: int = Field(0, ge=0, lt=2**64)
    threads: Optional[int] = Field(None, ge=1)
    target: Optional[TargetSection] = None
    schedule: Optional[ScheduleSection] = None
    sampler: SamplerSection = Field(default_factory=SamplerSection)
    estimation: EstimationSection = Field(default_factory=EstimationSection)
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    verify: VerifySection = Field(default_factory=VerifySection)

    def require(self, *sections: str, source: Optional[str] = None) -> None:
        """Raise ConfigError when a section the command needs is absent."""
        for name in sections:
            if getattr(self, name) is None:
                raise ConfigError(f"section '{name}' is required for this command", path=source)


def _node_line(root: Optional[yaml.Node], loc: Sequence[Any]) -> Optional[int]:
    """1-based line of the deepest YAML key on the validation error path."""
    if root is None:
        return None
    node, line = root, root.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for key_node, value_node in node.value:
                if key_node.value == str(key):
                    node, line = value_node, key_node.start_mark.line + 1
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def _apply_override(data: Dict[str, Any], override: str) -> None:
    if "=" not in override:
        raise ConfigError(f"override '{override}' must look like section.field=value", path="--set")
    dotted, raw = override.split("=", 1)
    keys = [k for k in dotted.strip().split(".") if k]
    if not keys:
        raise ConfigError(f"override '{override}' names no field", path="--set")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as e:
        raise ConfigError(f"override '{override}': {e}", path="--set") from e

    node = data
    for key in keys[:-1]:
        child = node.get(key)
        if child is None:
            child = {}
            node[key] = child
        if not isinstance(child, dict):
            raise ConfigError(f"override '{override}': '{key}' is not a section", path="--set")
        node = child
    node[keys[-1]] = value


def load_config(path: Optional[Path] = None, overrides: Sequence[str] = ()) -> StudyConfig:
    """Load a StudyConfig from YAML and apply `section.field=value` overrides."""
    source = str(path) if path is not None else None
    data: Dict[str, Any] = {}
    root: Optional[yaml.Node] = None

    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", path=source) from e
        try:
            root = yaml.compose(text)
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}", path=source, line=line) from e
        if not isinstance(data, dict):
            raise ConfigError("top level must be a mapping", path=source, line=1)

    for override in overrides:
        _apply_override(data, override)

    try:
        return StudyConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        field = ".".join(str(part) for part in first["loc"]) or "<root>"
        line = _node_line(root, first["loc"])
        raise ConfigError(f"{field}: {first['msg']}", path=source, line=line) from e


class Settings:
    """Global settings and environment defaults."""

    def __init__(self):
        self.project_root = Path(__file__).parent.parent
        self.data_dir = self.project_root / "data"
        self.default_config = self.data_dir / "default.yaml"
        self.runs_dir = Path(os.getenv("STMH_OUT_DIR", str(self.project_root / "runs")))
        self.log_level = os.getenv("STMH_LOG_LEVEL", "INFO")

        threads = os.getenv("STMH_THREADS")
        self.threads: Optional[int] = int(threads) if threads and threads.isdigit() else None

    def resolve_threads(self, flag: Optional[int], config: StudyConfig) -> int:
        """Flag, then config, then STMH_THREADS, then all cores."""
        for candidate in (flag, config.threads, self.threads):
            if candidate is not None and candidate >= 1:
                return candidate
        return os.cpu_count() or 1

    def resolve_out_dir(self, flag: Optional[Path], command: str) -> Path:
        if flag is not None:
            return Path(flag)
        return self.runs_dir / command


# Global settings instance
settings = Settings()

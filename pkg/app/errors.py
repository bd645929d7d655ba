"""Exception hierarchy shared by the sampler, the verifier and the CLI."""

from typing import Optional


class StudyError(Exception):
    """Base class for errors that map onto a CLI exit code."""

    exit_code: int = 1


class ConfigError(StudyError):
    """Configuration file could not be parsed or validated."""

    exit_code = 2

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        if path is not None and line is not None:
            message = f"{path}:{line}: {message}"
        elif path is not None:
            message = f"{path}: {message}"
        super().__init__(message)


class NumericError(StudyError):
    """A numerical routine failed to converge or produced non-finite values."""

    exit_code = 3


class StateError(NumericError):
    """Sampler state has a non-finite log density."""


class EstimationStallError(NumericError):
    """Partition estimation exceeded its restart cap at some level."""

    def __init__(self, level: int, restarts: int, found: int, wanted: int):
        self.level = level
        self.restarts = restarts
        super().__init__(
            f"partition estimation stalled at level {level}: "
            f"{found}/{wanted} samples after {restarts} restarts"
        )


class CapacityError(NumericError):
    """Discretized chain would exceed the dense state-space cap."""


class DegenerateRestrictionError(NumericError):
    """Restricted variance form is singular beyond the constant mode."""


class PathError(NumericError):
    """A canonical path uses a transition of zero probability."""


class InvariantError(NumericError):
    """An internal invariant that construction should guarantee is broken."""


class VerificationFailed(StudyError):
    """At least one verification row failed."""

    exit_code = 4

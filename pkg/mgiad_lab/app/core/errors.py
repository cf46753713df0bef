"""
Exception hierarchy for the MGiaD toolkit.

Every error raised on purpose by the library derives from MGiaDError so the
CLI can map it onto a stable exit code.
"""

from typing import List, Optional


class MGiaDError(Exception):
    """Base class for all library errors."""


class ConfigurationError(MGiaDError):
    """Invalid shapes, channel plans, group sizes or ladders."""


class UsageError(MGiaDError):
    """An API was called in a state where it cannot do its job."""


class OracleRefusalError(MGiaDError):
    """A dense oracle was asked to materialize something too large."""


class DatasetParseError(MGiaDError):
    """A dataset file does not follow its binary layout."""

    def __init__(self, message: str, path: Optional[str] = None, offset: Optional[int] = None):
        self.path = path
        self.offset = offset
        location = []
        if path is not None:
            location.append(f"file {path}")
        if offset is not None:
            location.append(f"byte offset {offset}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")


class BadMagicError(DatasetParseError):
    """Magic number does not match the expected file kind."""


class TruncatedFileError(DatasetParseError):
    """File ends before the declared payload."""


class CountMismatchError(DatasetParseError):
    """Header counts disagree with each other or with the payload."""


class TrainingError(MGiaDError):
    """Training could not continue."""


class NonFiniteGradientError(TrainingError):
    """A gradient contains NaN or Inf."""

    def __init__(self, parameter: str, nan_count: int, inf_count: int):
        self.parameter = parameter
        super().__init__(
            f"non-finite gradient for parameter '{parameter}': "
            f"{nan_count} NaN, {inf_count} Inf entries"
        )


class TrainingDivergedError(TrainingError):
    """Loss exploded relative to the first epoch."""

    def __init__(self, message: str, losses: List[float]):
        self.losses = list(losses)
        super().__init__(message)


class CheckpointError(MGiaDError):
    """Checkpoint file is unreadable."""


class CheckpointMismatchError(CheckpointError):
    """Checkpoint parameters do not fit the model."""

"""Exception hierarchy shared across the package.

Every error raised by the library derives from SkelalignError so CLI and
service layers can map error classes to exit codes / HTTP statuses.
"""

from __future__ import annotations


class SkelalignError(Exception):
    """Base class for all library errors."""


class ValidationError(SkelalignError):
    """An input violates a documented precondition (shape, range, finiteness)."""


class DegenerateReferenceError(SkelalignError):
    """Reference frame of a sequence is unusable (zero-length bone in frame 1)."""


class MalformedClipError(SkelalignError):
    """Clip JSON is syntactically or structurally invalid."""


class JointCountError(MalformedClipError):
    """A frame does not contain exactly the expected number of joints."""


class NonFiniteCoordinateError(MalformedClipError):
    """A coordinate is NaN/Inf, or a required joint is missing."""


class FormatVersionError(MalformedClipError):
    """Clip or checkpoint declares an unsupported format version."""


class SplitError(SkelalignError):
    """Dataset directory cannot be split into the benchmark protocol."""


class ConfigError(SkelalignError):
    """An operation was requested with unsupported configuration."""


class TrainingDivergedError(SkelalignError):
    """Loss became non-finite during training."""


class RevisionConflictError(SkelalignError):
    """Annotation write carried a stale revision."""


class UnannotatedFramesError(SkelalignError):
    """Operation requires fully annotated frames; some are missing."""

    def __init__(self, missing_frames: list[int]):
        self.missing_frames = list(missing_frames)
        super().__init__(f"frames not fully annotated: {self.missing_frames}")

"""Exception types shared across the package."""

from __future__ import annotations


class ContractViolationError(ValueError):
    """An argument violated a documented precondition."""


class CorruptFileError(Exception):
    """A data file failed to parse; carries the offending location."""

    def __init__(self, path: str, line_no: int | None, reason: str):
        self.path = path
        self.line_no = line_no
        self.reason = reason
        loc = f"{path}:{line_no}" if line_no is not None else path
        super().__init__(f"{loc}: {reason}")


class EmptySegmentError(Exception):
    """A gesture event selected zero sensor samples."""

    def __init__(self, label: str, start_ms: int, end_ms: int):
        self.label = label
        self.start_ms = start_ms
        self.end_ms = end_ms
        super().__init__(
            f"event {label} [{start_ms}, {end_ms}] ms selects no samples"
        )


class CheckpointError(Exception):
    """Base class for checkpoint load failures."""


class MalformedCheckpointError(CheckpointError):
    """File is not a readable checkpoint (bad magic, truncated, bad header)."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an unsupported format version."""


class CheckpointShapeError(CheckpointError):
    """Stored arrays disagree with the dimensions the header declares."""

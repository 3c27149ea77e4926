"""Exception hierarchy shared by every SMDR-IS module.

Each error also derives from the builtin category a caller would naturally catch
(``ValueError`` for bad inputs, ``RuntimeError`` for failures during a run), so
generic handlers keep working.
"""

from typing import Any, Dict, Optional


class SmdrisError(Exception):
    """Base class for all SMDR-IS errors."""


class DimensionError(SmdrisError, ValueError):
    """Spatial dimensions violate a divisibility or size precondition."""

    def __init__(self, message: str, axis: Optional[str] = None):
        super().__init__(message)
        self.axis = axis


class ChannelMismatchError(SmdrisError, ValueError):
    """Feature channel count does not match the block it is fed to."""


class ShapeMismatchError(SmdrisError, ValueError):
    """Two tensors that must share a shape do not."""


class ConfigMismatchError(SmdrisError, ValueError):
    """A checkpoint was written with a different model configuration.

    Attributes:
        diff: Mapping of key -> (expected, found) for every differing key.
    """

    def __init__(self, message: str, diff: Optional[Dict[str, Any]] = None):
        self.diff = diff or {}
        if self.diff:
            lines = [f"  {key}: expected {exp!r}, found {got!r}" for key, (exp, got) in self.diff.items()]
            message = message + "\n" + "\n".join(lines)
        super().__init__(message)


class CheckpointError(SmdrisError, RuntimeError):
    """Checkpoint archive is unreadable, corrupt or of an unknown format."""


class DatasetError(SmdrisError, ValueError):
    """Dataset layout is missing, empty or inconsistent."""


class ImageReadError(SmdrisError, OSError):
    """An image file could not be decoded."""


class NonFiniteLossError(SmdrisError, RuntimeError):
    """Training produced a NaN or infinite loss.

    Attributes:
        record: Diagnostic log record (dict) of the failing iteration.
    """

    def __init__(self, message: str, record: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.record = record or {}


class AblationError(SmdrisError, RuntimeError):
    """An ablation row failed to build or train."""

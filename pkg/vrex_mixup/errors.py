"""
Exception hierarchy for the training engine.

Every error carries an ``exit_code`` so the command-line layer can map failures
onto its stable contract: 2 for usage, configuration and input-format problems,
1 for runtime failures.
"""

from typing import List, Optional


class VRexMixupError(Exception):
    """Base class for all errors raised by this package."""
    exit_code = 1


class ValidationError(VRexMixupError):
    """A value violates a documented precondition."""
    pass


class ShapeError(VRexMixupError):
    """Operand shapes do not agree."""

    def __init__(self, message: str, *shapes):
        super().__init__(message)
        self.shapes = tuple(tuple(s) for s in shapes)


class SchemaError(VRexMixupError):
    """A data file or checkpoint does not match the expected layout."""
    exit_code = 2


class DataFormatError(VRexMixupError):
    """A data file row could not be parsed."""
    exit_code = 2

    def __init__(self, message: str, line_number: Optional[int] = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class NumericalError(VRexMixupError):
    """A computation produced a non-finite value."""

    def __init__(self, message: str, component: Optional[int] = None):
        super().__init__(message)
        self.component = component


class UsageError(VRexMixupError):
    """The API was called in an unsupported way."""
    exit_code = 2


class ConfigError(ValidationError):
    """Configuration is invalid; all detected issues are reported together."""
    exit_code = 2

    def __init__(self, message: str, issues: Optional[List[str]] = None):
        self.issues = list(issues or [])
        if self.issues:
            message = message + ": " + "; ".join(self.issues)
        super().__init__(message)


class CheckpointError(VRexMixupError):
    """A checkpoint could not be read, written or applied."""

    def __init__(self, message: str, path: Optional[str] = None):
        if path is not None:
            message = f"{message} ({path})"
        super().__init__(message)
        self.path = path


__all__ = [
    'VRexMixupError', 'ValidationError', 'ShapeError', 'SchemaError', 'DataFormatError',
    'NumericalError', 'UsageError', 'ConfigError', 'CheckpointError',
]

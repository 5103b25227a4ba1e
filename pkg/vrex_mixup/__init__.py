"""
Two-stage domain generalization for multi-environment tabular data: VREx
variance-penalized pretraining followed by Mixup fine-tuning, on a small
reverse-mode differentiation engine.
"""

from config import TOOL_VERSION

from .errors import (
    VRexMixupError, ValidationError, ShapeError, SchemaError, DataFormatError,
    NumericalError, UsageError, ConfigError, CheckpointError,
)

__version__ = TOOL_VERSION

__all__ = [
    'VRexMixupError', 'ValidationError', 'ShapeError', 'SchemaError', 'DataFormatError',
    'NumericalError', 'UsageError', 'ConfigError', 'CheckpointError', '__version__',
]

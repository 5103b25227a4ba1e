"""
Minimal reverse-mode differentiation over dense float64 tensors.
"""

from .tape import Tape, TracedValue, Tensor, as_tensor, backward, check_finite
from .ops import (
    matmul, add, add_bias, scale, stack, relu, softmax_cross_entropy,
    reduce_mean, variance_scalar, VARIANCE_MODES,
)
from .gradcheck import grad_check, numeric_gradient, relative_error

__all__ = [
    'Tape', 'TracedValue', 'Tensor', 'as_tensor', 'backward', 'check_finite',
    'matmul', 'add', 'add_bias', 'scale', 'stack', 'relu', 'softmax_cross_entropy',
    'reduce_mean', 'variance_scalar', 'VARIANCE_MODES',
    'grad_check', 'numeric_gradient', 'relative_error',
]

"""
Finite-difference verification of analytic gradients.
"""

from typing import Callable

import numpy as np

from ..errors import NumericalError, UsageError
from .tape import Tape, TracedValue, Tensor, as_tensor, check_finite

TracedFunction = Callable[[Tape, TracedValue], TracedValue]

RELATIVE_ERROR_FLOOR = 1e-8


def _evaluate(f: TracedFunction, point: Tensor) -> float:
    tape = Tape()
    out = f(tape, tape.constant(point))
    if out.value.size != 1:
        raise UsageError(f"checked function must return a scalar, got shape {out.shape}")
    return float(out.value.reshape(-1)[0])


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    """|a - n| / max(floor, |a| + |n|), componentwise."""
    denom = np.maximum(RELATIVE_ERROR_FLOOR, np.abs(analytic) + np.abs(numeric))
    return np.abs(analytic - numeric) / denom


def numeric_gradient(f: TracedFunction, point: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central differences (f(x+h) - f(x-h)) / 2h for every component of ``point``."""
    point = as_tensor(point)
    grad = np.zeros_like(point)
    flat_grad = grad.reshape(-1)
    for i in range(point.size):
        shifted = point.copy()
        flat = shifted.reshape(-1)
        flat[i] = point.reshape(-1)[i] + h
        f_plus = _evaluate(f, shifted)
        flat[i] = point.reshape(-1)[i] - h
        f_minus = _evaluate(f, shifted)
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise NumericalError(f"function is not finite around component {i}", i)
        flat_grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def grad_check(f: TracedFunction, point: Tensor, h: float = 1e-5) -> float:
    """
    Compare backward gradients with central differences.

    Args:
        f: Function of (tape, traced input) returning a scalar traced value
        point: Input tensor at which to check
        h: Finite-difference step

    Returns:
        Maximum componentwise relative error

    Raises:
        NumericalError: If f is not finite at or around the point
    """
    point = as_tensor(point)
    tape = Tape()
    x = tape.leaf(point)
    out = f(tape, x)
    if out.value.size != 1:
        raise UsageError(f"checked function must return a scalar, got shape {out.shape}")
    check_finite(out.value.reshape(-1), "checked function value")
    analytic = tape.backward(out)[x.node_id]
    check_finite(analytic.reshape(-1), "analytic gradient")

    numeric = numeric_gradient(f, point, h)
    if point.size == 0:
        return 0.0
    return float(relative_error(analytic, numeric).max())


__all__ = ['grad_check', 'numeric_gradient', 'relative_error', 'TracedFunction']

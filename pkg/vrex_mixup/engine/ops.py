"""
Differentiable operations over traced values.

Each op computes its forward value with numpy and records a closure that maps
the upstream gradient onto its operands.
"""

from typing import Sequence

import numpy as np

from ..errors import ShapeError, ValidationError, UsageError
from .tape import TracedValue

VARIANCE_MODES = ("population", "sample")
TARGET_ROW_TOLERANCE = 1e-9


def _require_matrix(a: TracedValue, name: str) -> None:
    if a.value.ndim != 2:
        raise ShapeError(f"{name} must be a matrix, got shape {a.shape}", a.shape)


def matmul(a: TracedValue, b: TracedValue) -> TracedValue:
    """Matrix product of an [m x k] and a [k x n] value."""
    _require_matrix(a, "left operand")
    _require_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul inner dimensions differ: {a.shape} vs {b.shape}", a.shape, b.shape
        )
    a_val, b_val = a.value, b.value

    def backward_fn(grad):
        return grad @ b_val.T, a_val.T @ grad

    return a.tape.record(a_val @ b_val, (a, b), backward_fn)


def add(a: TracedValue, b: TracedValue) -> TracedValue:
    """Elementwise sum of two values of identical shape."""
    if a.shape != b.shape:
        raise ShapeError(f"add needs equal shapes: {a.shape} vs {b.shape}", a.shape, b.shape)
    return a.tape.record(a.value + b.value, (a, b), lambda grad: (grad, grad))


def add_bias(x: TracedValue, bias: TracedValue) -> TracedValue:
    """Add a length-n vector to every row of a [B x n] matrix."""
    _require_matrix(x, "input")
    if bias.value.ndim != 1 or bias.shape[0] != x.shape[1]:
        raise ShapeError(
            f"bias shape {bias.shape} does not match input width of {x.shape}", x.shape, bias.shape
        )

    def backward_fn(grad):
        return grad, grad.sum(axis=0)

    return x.tape.record(x.value + bias.value, (x, bias), backward_fn)


def scale(a: TracedValue, factor: float) -> TracedValue:
    """Multiply by a constant."""
    factor = float(factor)
    return a.tape.record(a.value * factor, (a,), lambda grad: (grad * factor,))


def stack(values: Sequence[TracedValue]) -> TracedValue:
    """Collect scalar values into a vector."""
    if not values:
        raise ValidationError("stack needs at least one value")
    for position, v in enumerate(values):
        if v.value.size != 1:
            raise ShapeError(f"stack element {position} is not a scalar: {v.shape}", v.shape)
    tape = values[0].tape
    shapes = [v.shape for v in values]
    out = np.array([float(v.value.reshape(-1)[0]) for v in values], dtype=np.float64)

    def backward_fn(grad):
        return [np.full(shape, grad[i]) for i, shape in enumerate(shapes)]

    return tape.record(out, tuple(values), backward_fn)


def relu(a: TracedValue) -> TracedValue:
    """Elementwise max(0, x); the subgradient at exactly 0 is 0."""
    mask = a.value > 0

    def backward_fn(grad):
        return (grad * mask,)

    return a.tape.record(np.where(mask, a.value, 0.0), (a,), backward_fn)


def softmax_cross_entropy(logits: TracedValue, targets) -> TracedValue:
    """
    Mean cross-entropy between softmax(logits) and soft target rows.

    Args:
        logits: Traced [B x C] scores
        targets: [B x C] array whose rows are probability distributions

    Returns:
        Scalar traced loss

    Raises:
        ValidationError: If a target row does not sum to 1 or C < 2
        ShapeError: If targets and logits disagree in shape
    """
    _require_matrix(logits, "logits")
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != logits.shape:
        raise ShapeError(
            f"targets shape {targets.shape} does not match logits {logits.shape}",
            targets.shape, logits.shape,
        )
    batch, classes = logits.shape
    if classes < 2:
        raise ValidationError(f"cross-entropy needs at least 2 classes, got {classes}")
    if batch == 0:
        raise ValidationError("cross-entropy needs a nonempty batch")
    row_sums = targets.sum(axis=1)
    bad_rows = np.flatnonzero(np.abs(row_sums - 1.0) > TARGET_ROW_TOLERANCE)
    if bad_rows.size:
        row = int(bad_rows[0])
        raise ValidationError(f"target row {row} sums to {row_sums[row]!r}, expected 1")

    shifted = logits.value - logits.value.max(axis=1, keepdims=True)
    exp_shifted = np.exp(shifted)
    sum_exp = exp_shifted.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(sum_exp)
    probs = exp_shifted / sum_exp
    loss = -(targets * log_probs).sum(axis=1).mean()

    def backward_fn(grad):
        return ((probs - targets) * (grad / batch),)

    return logits.tape.record(np.asarray(loss), (logits,), backward_fn)


def reduce_mean(a: TracedValue) -> TracedValue:
    """Arithmetic mean of all elements."""
    count = a.value.size
    if count == 0:
        raise ValidationError("reduce_mean of an empty value")
    shape = a.shape

    def backward_fn(grad):
        return (np.full(shape, grad / count),)

    return a.tape.record(np.asarray(a.value.mean()), (a,), backward_fn)


def variance_scalar(a: TracedValue, mode: str = "population") -> TracedValue:
    """
    Variance of the elements of a vector.

    Population mode divides by n, sample mode by n - 1. The gradient is
    2 (a_i - mean) / divisor; the mean-path terms cancel.
    """
    if mode not in VARIANCE_MODES:
        raise UsageError(f"variance mode must be one of {VARIANCE_MODES}, got {mode!r}")
    n = a.value.size
    if n < 2:
        raise ValidationError(f"variance needs at least 2 elements, got {n}")
    centered = a.value - a.value.mean()
    divisor = n if mode == "population" else n - 1
    out = np.asarray((centered * centered).sum() / divisor)

    def backward_fn(grad):
        return (centered * (2.0 * grad / divisor),)

    return a.tape.record(out, (a,), backward_fn)


__all__ = [
    'matmul', 'add', 'add_bias', 'scale', 'stack', 'relu', 'softmax_cross_entropy',
    'reduce_mean', 'variance_scalar', 'VARIANCE_MODES',
]

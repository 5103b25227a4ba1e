"""
Recording tape for reverse-mode differentiation.

Values are dense float64 numpy arrays (row-major). Every operation appends one
node to the tape of its operands; since nodes are appended after their parents,
tape order is a topological order and the backward sweep simply walks it in
reverse.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NumericalError, UsageError, ValidationError

# Dense row-major float64 array; shape and flat values are the ndarray's own.
Tensor = np.ndarray

# Maps the upstream gradient of a node onto one gradient per parent.
BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


def as_tensor(values, shape: Optional[Sequence[int]] = None) -> Tensor:
    """Build a C-contiguous float64 tensor, optionally reshaping flat values."""
    array = np.array(values, dtype=np.float64, order="C")
    if shape is not None:
        shape = tuple(int(d) for d in shape)
        if any(d < 0 for d in shape):
            raise ValidationError(f"shape dimensions must be nonnegative, got {shape}")
        if int(np.prod(shape, dtype=np.int64)) != array.size:
            raise ValidationError(
                f"product of shape {shape} does not match {array.size} values"
            )
        array = array.reshape(shape)
    return array


@dataclass
class _Node:
    parents: Tuple[int, ...]
    backward_fn: Optional[BackwardFn]
    requires_grad: bool
    is_leaf: bool
    shape: Tuple[int, ...]


@dataclass(eq=False)
class TracedValue:
    """A tensor recorded on a tape."""
    value: Tensor
    node_id: int
    requires_grad: bool
    tape: "Tape" = field(repr=False)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def item(self) -> float:
        if self.value.size != 1:
            raise UsageError(f"item() needs a single-element value, got shape {self.shape}")
        return float(self.value.reshape(-1)[0])


class Tape:
    """Single-owner record of the operations performed on traced values."""

    def __init__(self):
        self._nodes: List[_Node] = []

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, value, requires_grad: bool = True) -> TracedValue:
        """Register an input tensor."""
        array = as_tensor(value)
        self._nodes.append(_Node((), None, requires_grad, True, array.shape))
        return TracedValue(array, len(self._nodes) - 1, requires_grad, self)

    def constant(self, value) -> TracedValue:
        """Register an input that never receives a gradient."""
        return self.leaf(value, requires_grad=False)

    def record(self, value: np.ndarray, parents: Sequence[TracedValue],
               backward_fn: BackwardFn) -> TracedValue:
        """Append the result of an operation on ``parents``."""
        for parent in parents:
            if parent.tape is not self:
                raise UsageError("operands belong to different tapes")
        requires_grad = any(p.requires_grad for p in parents)
        self._nodes.append(_Node(
            tuple(p.node_id for p in parents),
            backward_fn if requires_grad else None,
            requires_grad,
            False,
            value.shape,
        ))
        return TracedValue(value, len(self._nodes) - 1, requires_grad, self)

    def backward(self, root: TracedValue) -> Dict[int, np.ndarray]:
        """
        Compute exact gradients of a scalar root.

        Args:
            root: Scalar traced value recorded on this tape

        Returns:
            Mapping from node id of every requires_grad leaf to its gradient;
            leaves that do not reach the root get zeros.

        Raises:
            UsageError: If the root is not a scalar or lives on another tape
        """
        if root.tape is not self:
            raise UsageError("root belongs to a different tape")
        if root.value.size != 1:
            raise UsageError(f"backward needs a scalar root, got shape {root.shape}")

        grads: Dict[int, np.ndarray] = {}
        if root.requires_grad:
            grads[root.node_id] = np.ones_like(root.value)

        for node_id in range(root.node_id, -1, -1):
            node = self._nodes[node_id]
            if node.is_leaf or node_id not in grads:
                continue
            upstream = grads.pop(node_id)
            parent_grads = node.backward_fn(upstream)
            for parent_id, parent_grad in zip(node.parents, parent_grads):
                if parent_grad is None or not self._nodes[parent_id].requires_grad:
                    continue
                if parent_id in grads:
                    grads[parent_id] = grads[parent_id] + parent_grad
                else:
                    grads[parent_id] = parent_grad

        return {
            node_id: grads.get(node_id, np.zeros(node.shape))
            for node_id, node in enumerate(self._nodes)
            if node.is_leaf and node.requires_grad
        }

    def gradients(self, root: TracedValue, leaves: Sequence[TracedValue]) -> List[np.ndarray]:
        """Gradients of ``root`` with respect to ``leaves``, zeros where disconnected."""
        grads = self.backward(root)
        result = []
        for leaf in leaves:
            if leaf.tape is not self:
                raise UsageError("leaf belongs to a different tape")
            result.append(grads.get(leaf.node_id, np.zeros_like(leaf.value)))
        return result


def backward(root: TracedValue) -> Dict[int, np.ndarray]:
    """Run the backward sweep on the tape that recorded ``root``."""
    return root.tape.backward(root)


def check_finite(value: np.ndarray, what: str) -> None:
    """Raise NumericalError naming the first non-finite component."""
    bad = np.flatnonzero(~np.isfinite(value))
    if bad.size:
        raise NumericalError(f"{what} is not finite at component {int(bad[0])}", int(bad[0]))

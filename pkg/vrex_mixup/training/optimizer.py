"""
First-order optimizers over named parameter tensors.
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

import numpy as np

from ..errors import ShapeError, ValidationError
from ..model.mlp import ModelParams


@dataclass(frozen=True)
class OptimizerConfig:
    name: str = "adam"
    lr: float = 1e-3
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


@dataclass
class OptimizerState:
    """Step count and Adam moment estimates keyed like ``ModelParams.named_tensors``."""
    step: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)

    def copy(self) -> "OptimizerState":
        return OptimizerState(
            self.step,
            {k: v.copy() for k, v in self.first_moment.items()},
            {k: v.copy() for k, v in self.second_moment.items()},
        )


def init_optimizer_state(params: ModelParams) -> OptimizerState:
    """Zero moments and step 0."""
    named = params.named_tensors()
    return OptimizerState(
        0,
        {k: np.zeros_like(v) for k, v in named.items()},
        {k: np.zeros_like(v) for k, v in named.items()},
    )


def optimizer_step(params: ModelParams, grads: Dict[str, np.ndarray], state: OptimizerState,
                   config: OptimizerConfig) -> Tuple[ModelParams, OptimizerState]:
    """
    Apply one update; inputs are not modified.

    sgd: p - lr * g. adam: bias-corrected moment update
    p - lr * m_hat / (sqrt(v_hat) + eps).

    Raises:
        ValidationError: If gradient keys differ from the parameter keys
        ShapeError: If a gradient's shape differs from its parameter's
    """
    named = params.named_tensors()
    if set(grads) != set(named):
        missing = sorted(set(named) - set(grads))
        extra = sorted(set(grads) - set(named))
        raise ValidationError(f"gradient keys do not match parameters: missing {missing}, unexpected {extra}")
    for key, value in named.items():
        if np.shape(grads[key]) != value.shape:
            raise ShapeError(
                f"gradient for {key} has shape {np.shape(grads[key])}, parameter has {value.shape}",
                np.shape(grads[key]), value.shape,
            )

    step = state.step + 1
    if config.name == "sgd":
        updated = {k: v - config.lr * grads[k] for k, v in named.items()}
        return ModelParams.from_named(updated), OptimizerState(step, state.first_moment, state.second_moment)

    beta1, beta2 = config.betas
    first, second, updated = {}, {}, {}
    for key, value in named.items():
        g = grads[key]
        m = beta1 * state.first_moment.get(key, np.zeros_like(value)) + (1.0 - beta1) * g
        v = beta2 * state.second_moment.get(key, np.zeros_like(value)) + (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** step)
        v_hat = v / (1.0 - beta2 ** step)
        updated[key] = value - config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
        first[key] = m
        second[key] = v
    return ModelParams.from_named(updated), OptimizerState(step, first, second)


__all__ = ['OptimizerConfig', 'OptimizerState', 'init_optimizer_state', 'optimizer_step']

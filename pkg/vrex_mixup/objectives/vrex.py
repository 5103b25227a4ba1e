"""
Variance risk extrapolation: mean per-environment risk plus lambda times the
variance of those risks.
"""

from dataclasses import dataclass, asdict
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from config import ConfigValidationResult, ConfigValidator
from ..data.batching import BatchGroup
from ..engine import ops
from ..engine.tape import Tape, TracedValue
from ..errors import ValidationError
from ..model.mlp import BoundParams, ModelParams, bind_params, forward


@dataclass
class VRExConfig:
    """Penalty strength and its warm-up."""
    lambda_max: float = 100.0
    warmup_epochs: int = 10
    variance_mode: str = "population"

    def validate(self) -> ConfigValidationResult:
        result = ConfigValidationResult()
        validator = ConfigValidator()
        error = validator.validate_positive(self.lambda_max, "lambda_max", allow_zero=True)
        if error:
            result.add_issue(error)
        if self.warmup_epochs < 0:
            result.add_issue(f"warmup_epochs must be >= 0, got {self.warmup_epochs}")
        error = validator.validate_choice(self.variance_mode, list(ops.VARIANCE_MODES), "variance_mode")
        if error:
            result.add_issue(error)
        return result

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class RiskVector:
    """Scalar risks indexed like the bundle's training environments."""
    risks: List[TracedValue]

    def __post_init__(self):
        if len(self.risks) < 2:
            raise ValidationError(f"a risk vector needs at least 2 environments, got {len(self.risks)}")
        for position, risk in enumerate(self.risks):
            if risk.value.size != 1:
                raise ValidationError(f"risk {position} is not a scalar: shape {risk.shape}")

    def __len__(self) -> int:
        return len(self.risks)

    def values(self) -> np.ndarray:
        return np.array([r.item() for r in self.risks])


def one_hot(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    targets = np.zeros((len(labels), num_classes))
    targets[np.arange(len(labels)), labels] = 1.0
    return targets


def per_environment_risks(params: Union[ModelParams, BoundParams], batch_group: BatchGroup,
                          num_classes: Optional[int] = None, n_envs: Optional[int] = None) -> RiskVector:
    """
    Cross-entropy of the model on each environment's batch.

    Args:
        params: Model parameters (bound parameters keep the risks differentiable)
        batch_group: One batch per environment, in bundle order
        num_classes: Number of classes; defaults to the model's output width
        n_envs: Expected number of environments; a shorter group is rejected

    Raises:
        ValidationError: If the group misses an environment
    """
    if n_envs is not None and len(batch_group) != n_envs:
        raise ValidationError(
            f"batch group covers {len(batch_group)} environments, expected {n_envs}"
        )
    if isinstance(params, ModelParams):
        params = bind_params(params, Tape(), requires_grad=False)
    risks = []
    for batch in batch_group:
        logits = forward(params, batch.features)
        classes = num_classes or logits.shape[1]
        risks.append(ops.softmax_cross_entropy(logits, one_hot(batch.labels, classes)))
    return RiskVector(risks)


def vrex_objective(risks: RiskVector, lam: float, mode: str = "population") -> TracedValue:
    """
    (1/n) sum L_i + lam * Var[L_i].

    Raises:
        ValidationError: If lam is negative
    """
    if lam < 0:
        raise ValidationError(f"VREx coefficient must be >= 0, got {lam}")
    vector = ops.stack(risks.risks)
    mean = ops.reduce_mean(vector)
    penalty = ops.variance_scalar(vector, mode)
    return ops.add(mean, ops.scale(penalty, lam))


def lambda_at_epoch(config: VRExConfig, epoch: int) -> float:
    """Linear warm-up from 0 to lambda_max over ``warmup_epochs``."""
    if epoch < 0:
        raise ValidationError(f"epoch must be >= 0, got {epoch}")
    if config.warmup_epochs == 0:
        return float(config.lambda_max)
    return float(config.lambda_max) * min(1.0, epoch / config.warmup_epochs)


def risk_statistics(values: Sequence[float], mode: str = "population") -> Dict[str, float]:
    """Mean and variance of plain risk values, for logging."""
    values = np.asarray(values, dtype=np.float64)
    centered = values - values.mean()
    divisor = len(values) if mode == "population" else len(values) - 1
    return {"mean": float(values.mean()), "variance": float((centered * centered).sum() / divisor)}


__all__ = ['VRExConfig', 'RiskVector', 'per_environment_risks', 'vrex_objective',
           'lambda_at_epoch', 'one_hot', 'risk_statistics']

"""
Mixup: convex combinations of example pairs and of their one-hot labels,
with one Beta(alpha, alpha) coefficient per pair.
"""

from dataclasses import dataclass, asdict
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np

from config import ConfigValidationResult, ConfigValidator
from ..data.environments import Environment, Example
from ..engine import ops
from ..engine.tape import TracedValue
from ..errors import ShapeError, ValidationError
from ..model.mlp import BoundParams, ModelParams, forward

PAIRING_MODES = ["cross_domain", "any"]


@dataclass
class MixupConfig:
    """Interpolation law and pairing rule."""
    alpha: float = 0.2
    pairing: str = "cross_domain"
    seed: int = 0

    def validate(self) -> ConfigValidationResult:
        result = ConfigValidationResult()
        validator = ConfigValidator()
        error = validator.validate_positive(self.alpha, "alpha")
        if error:
            result.add_issue(error)
        error = validator.validate_choice(self.pairing, PAIRING_MODES, "pairing")
        if error:
            result.add_issue(error)
        return result

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class MixedBatch:
    """Interpolated features and soft labels, with the pairs that produced them."""
    features: np.ndarray
    soft_labels: np.ndarray
    lams: np.ndarray
    first: np.ndarray   # (environment index, row) of the lam-weighted member
    second: np.ndarray  # (environment index, row) of the (1 - lam)-weighted member

    def __len__(self) -> int:
        return len(self.lams)


def mixup_pair(a: Example, b: Example, lam: float,
               num_classes: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """
    Interpolate two examples.

    Returns:
        (lam * a + (1 - lam) * b, lam * onehot(a) + (1 - lam) * onehot(b))

    Raises:
        ShapeError: If the feature lengths differ
        ValidationError: If lam lies outside [0, 1]
    """
    fa = np.asarray(a.features, dtype=np.float64)
    fb = np.asarray(b.features, dtype=np.float64)
    if fa.shape != fb.shape:
        raise ShapeError(f"mixup pair feature shapes differ: {fa.shape} vs {fb.shape}", fa.shape, fb.shape)
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"mixup coefficient must lie in [0, 1], got {lam}")
    ya = np.zeros(num_classes)
    ya[a.label] = 1.0
    yb = np.zeros(num_classes)
    yb[b.label] = 1.0
    return lam * fa + (1.0 - lam) * fb, lam * ya + (1.0 - lam) * yb


def _pooled_index(envs: Sequence[Environment]) -> np.ndarray:
    """(environment index, row) for every example of every environment."""
    return np.concatenate([
        np.column_stack([np.full(len(env), k), np.arange(len(env))])
        for k, env in enumerate(envs)
    ])


def sample_mixup_batch(envs: Sequence[Environment], batch_size: int, config: MixupConfig,
                       step_seed: int, num_classes: int = 2) -> MixedBatch:
    """
    Draw ``batch_size`` pairs and interpolate them.

    Pairs are uniform over the pooled training set; with cross_domain pairing the
    second member is uniform over examples of the other environments.

    Raises:
        ValidationError: If cross_domain pairing is requested with one environment
    """
    if config.pairing == "cross_domain" and len(envs) < 2:
        raise ValidationError("cross_domain pairing needs at least 2 environments")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")

    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), int(step_seed)]))
    pooled = _pooled_index(envs)
    first = pooled[rng.integers(0, len(pooled), size=batch_size)]
    if config.pairing == "any":
        second = pooled[rng.integers(0, len(pooled), size=batch_size)]
    else:
        others = {k: pooled[pooled[:, 0] != k] for k in range(len(envs))}
        second = np.empty_like(first)
        for i, env_index in enumerate(first[:, 0]):
            candidates = others[int(env_index)]
            second[i] = candidates[rng.integers(0, len(candidates))]
    lams = rng.beta(config.alpha, config.alpha, size=batch_size)

    def gather(pairs):
        features = np.stack([envs[k].features[row] for k, row in pairs])
        labels = np.array([envs[k].labels[row] for k, row in pairs])
        targets = np.zeros((len(pairs), num_classes))
        targets[np.arange(len(pairs)), labels] = 1.0
        return features, targets

    fa, ya = gather(first)
    fb, yb = gather(second)
    weights = lams[:, None]
    return MixedBatch(
        features=weights * fa + (1.0 - weights) * fb,
        soft_labels=weights * ya + (1.0 - weights) * yb,
        lams=lams,
        first=first,
        second=second,
    )


def mixed_loss(params: Union[ModelParams, BoundParams], batch: MixedBatch) -> TracedValue:
    """Soft-target cross-entropy of the model on a mixed batch."""
    return ops.softmax_cross_entropy(forward(params, batch.features), batch.soft_labels)


__all__ = ['MixupConfig', 'MixedBatch', 'mixup_pair', 'sample_mixup_batch', 'mixed_loss',
           'PAIRING_MODES']

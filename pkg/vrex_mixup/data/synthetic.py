"""
Synthetic multi-environment benchmark with a spurious feature.

Each example has an invariant block whose class means are fixed across
environments and one spurious coordinate whose agreement with the label varies
per environment. Default sizes are 1124 training examples (564 of class 1) and
308 validation examples (128 of class 1), split evenly over four source
domains.
"""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List

import numpy as np

from config import ConfigValidationResult, ConfigValidator
from ..errors import ConfigError
from .environments import DatasetBundle, Environment

LABEL_SAMPLING_MODES = ["exact", "bernoulli"]

TRAIN_TOTAL, TRAIN_POSITIVE = 1124, 564
VAL_TOTAL, VAL_POSITIVE = 308, 128


def even_split(total: int, parts: int) -> List[int]:
    base, extra = divmod(total, parts)
    return [base + (1 if k < extra else 0) for k in range(parts)]


@dataclass
class SpuriousSpec:
    """Parameters of the spurious-correlation generator."""
    n_train_envs: int = 4
    train_correlations: List[float] = field(default_factory=lambda: [0.95, 0.9, 0.85, 0.8])
    test_correlation: float = 0.1
    n_invariant_dims: int = 5
    invariant_mean: float = 1.0
    invariant_std: float = 1.0
    spurious_mean: float = 3.0
    spurious_std: float = 0.5
    train_sizes: List[int] = field(default_factory=lambda: even_split(TRAIN_TOTAL, 4))
    val_sizes: List[int] = field(default_factory=lambda: even_split(VAL_TOTAL, 4))
    test_size: int = 1000
    class_balance: float = TRAIN_POSITIVE / TRAIN_TOTAL
    val_class_balance: float = VAL_POSITIVE / VAL_TOTAL
    label_sampling: str = "exact"
    seed: int = 0

    @property
    def feature_dim(self) -> int:
        return self.n_invariant_dims + 1

    def validate(self) -> ConfigValidationResult:
        result = ConfigValidationResult()
        validator = ConfigValidator()
        if self.n_train_envs < 2:
            result.add_issue(f"n_train_envs must be >= 2, got {self.n_train_envs}")
        if len(self.train_correlations) != self.n_train_envs:
            result.add_issue(
                f"train_correlations has {len(self.train_correlations)} entries, "
                f"expected n_train_envs={self.n_train_envs}"
            )
        for position, p in enumerate(self.train_correlations):
            error = validator.validate_probability(p, f"train_correlations[{position}]")
            if error:
                result.add_issue(error)
        for name in ("test_correlation", "class_balance", "val_class_balance"):
            error = validator.validate_probability(getattr(self, name), name)
            if error:
                result.add_issue(error)
        for name in ("invariant_std", "spurious_std"):
            error = validator.validate_positive(getattr(self, name), name, allow_zero=True)
            if error:
                result.add_issue(error)
        if self.n_invariant_dims < 1:
            result.add_issue(f"n_invariant_dims must be >= 1, got {self.n_invariant_dims}")
        for name in ("train_sizes", "val_sizes"):
            sizes = getattr(self, name)
            if len(sizes) != self.n_train_envs:
                result.add_issue(f"{name} has {len(sizes)} entries, expected {self.n_train_envs}")
            if any(int(s) < 1 for s in sizes):
                result.add_issue(f"{name} must all be positive, got {sizes}")
        if self.test_size < 0:
            result.add_issue(f"test_size must be >= 0, got {self.test_size}")
        error = validator.validate_choice(self.label_sampling, LABEL_SAMPLING_MODES, "label_sampling")
        if error:
            result.add_issue(error)
        return result

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "SpuriousSpec":
        return cls(**values)


def _draw_labels(rng: np.random.Generator, size: int, balance: float, mode: str) -> np.ndarray:
    if mode == "exact":
        positives = int(round(balance * size))
        labels = np.zeros(size, dtype=np.int64)
        labels[:positives] = 1
        return rng.permutation(labels)
    return (rng.random(size) < balance).astype(np.int64)


def generate_environment(spec: SpuriousSpec, domain_id: int, size: int, correlation: float,
                         balance: float, rng: np.random.Generator) -> Environment:
    """Draw one environment whose spurious coordinate agrees with the label with prob ``correlation``."""
    labels = _draw_labels(rng, size, balance, spec.label_sampling)
    signs = (2 * labels - 1).astype(np.float64)
    invariant = spec.invariant_mean * signs[:, None] + rng.normal(
        0.0, spec.invariant_std, size=(size, spec.n_invariant_dims)
    )
    agrees = rng.random(size) < correlation
    spurious_signs = np.where(agrees, signs, -signs)
    spurious = spec.spurious_mean * spurious_signs + rng.normal(0.0, spec.spurious_std, size=size)
    return Environment(domain_id, np.column_stack([invariant, spurious]), labels)


def generate_spurious_environments(spec: SpuriousSpec) -> DatasetBundle:
    """
    Generate training, in-distribution validation and shifted test environments.

    Training and validation environment k (domain id k) share correlation p_k;
    the test environment gets domain id n_train_envs and ``test_correlation``.

    Raises:
        ConfigError: If the spec is invalid (e.g. a probability outside [0, 1])
    """
    result = spec.validate()
    if not result.valid:
        raise ConfigError("invalid spurious-correlation spec", result.issues)

    streams = [
        np.random.default_rng(child)
        for child in np.random.SeedSequence(int(spec.seed)).spawn(2 * spec.n_train_envs + 1)
    ]
    train_envs = [
        generate_environment(spec, k, int(spec.train_sizes[k]), spec.train_correlations[k],
                             spec.class_balance, streams[k])
        for k in range(spec.n_train_envs)
    ]
    val_envs = [
        generate_environment(spec, k, int(spec.val_sizes[k]), spec.train_correlations[k],
                             spec.val_class_balance, streams[spec.n_train_envs + k])
        for k in range(spec.n_train_envs)
    ]
    test_envs = []
    if spec.test_size > 0:
        test_envs.append(generate_environment(
            spec, spec.n_train_envs, spec.test_size, spec.test_correlation,
            spec.class_balance, streams[-1],
        ))
    return DatasetBundle(train_envs, val_envs, spec.feature_dim, 2, test_envs)


__all__ = ['SpuriousSpec', 'generate_spurious_environments', 'generate_environment',
           'LABEL_SAMPLING_MODES', 'even_split', 'TRAIN_TOTAL', 'VAL_TOTAL']

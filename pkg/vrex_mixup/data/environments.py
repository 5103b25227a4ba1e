"""
Multi-environment dataset containers.

An environment stores its examples column-wise (a feature matrix and a label
vector) so batches are plain row selections; ``Example`` views are produced on
demand.
"""

from dataclasses import dataclass, field
from typing import Iterator, List, Sequence

import numpy as np

from ..errors import SchemaError, ValidationError


@dataclass(frozen=True)
class Example:
    """One labeled feature vector from a source domain."""
    features: np.ndarray
    label: int
    domain_id: int


@dataclass
class Environment:
    """All examples of one source domain."""
    domain_id: int
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.domain_id < 0:
            raise ValidationError(f"domain_id must be >= 0, got {self.domain_id}")
        if self.features.ndim != 2:
            raise SchemaError(f"features must be a matrix, got shape {self.features.shape}")
        if len(self.labels) != len(self.features):
            raise SchemaError(
                f"environment {self.domain_id}: {len(self.features)} feature rows but "
                f"{len(self.labels)} labels"
            )
        if len(self.labels) == 0:
            raise ValidationError(f"environment {self.domain_id} is empty")

    @classmethod
    def from_examples(cls, examples: Sequence[Example]) -> "Environment":
        if not examples:
            raise ValidationError("an environment needs at least one example")
        domain_id = examples[0].domain_id
        for position, example in enumerate(examples):
            if example.domain_id != domain_id:
                raise ValidationError(
                    f"example {position} has domain_id {example.domain_id}, expected {domain_id}"
                )
        return cls(
            domain_id,
            np.stack([np.asarray(e.features, dtype=np.float64) for e in examples]),
            np.array([e.label for e in examples]),
        )

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def examples(self) -> List[Example]:
        return list(self.iter_examples())

    def iter_examples(self) -> Iterator[Example]:
        for row, label in zip(self.features, self.labels):
            yield Example(row.copy(), int(label), self.domain_id)

    def example(self, index: int) -> Example:
        return Example(self.features[index].copy(), int(self.labels[index]), self.domain_id)

    def class_counts(self, num_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=num_classes)

    def equals(self, other: "Environment") -> bool:
        return (
            self.domain_id == other.domain_id
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )


def check_environments(envs: Sequence[Environment], feature_dim: int, num_classes: int,
                       what: str = "environments") -> None:
    """Check widths and label ranges of a group of environments."""
    for env in envs:
        if env.feature_dim != feature_dim:
            raise SchemaError(
                f"{what}: domain {env.domain_id} has {env.feature_dim} features, expected {feature_dim}"
            )
        bad = np.flatnonzero((env.labels < 0) | (env.labels >= num_classes))
        if bad.size:
            raise ValidationError(
                f"{what}: domain {env.domain_id} example {int(bad[0])} has label "
                f"{int(env.labels[bad[0]])} outside [0, {num_classes})"
            )


@dataclass
class DatasetBundle:
    """Training, validation and held-out test environments of one benchmark."""
    train_envs: List[Environment]
    val_envs: List[Environment]
    feature_dim: int
    num_classes: int
    test_envs: List[Environment] = field(default_factory=list)

    def __post_init__(self):
        if len(self.train_envs) < 2:
            raise ValidationError(
                f"at least 2 training environments are required, got {len(self.train_envs)}"
            )
        check_environments(self.train_envs, self.feature_dim, self.num_classes, "train")
        check_environments(self.val_envs, self.feature_dim, self.num_classes, "val")
        check_environments(self.test_envs, self.feature_dim, self.num_classes, "test")

    def summary(self) -> dict:
        def sizes(envs):
            return {env.domain_id: len(env) for env in envs}
        return {
            "train": sizes(self.train_envs),
            "val": sizes(self.val_envs),
            "test": sizes(self.test_envs),
            "feature_dim": self.feature_dim,
            "num_classes": self.num_classes,
        }

    def equals(self, other: "DatasetBundle") -> bool:
        def same(a, b):
            return len(a) == len(b) and all(x.equals(y) for x, y in zip(a, b))
        return (
            self.feature_dim == other.feature_dim
            and self.num_classes == other.num_classes
            and same(self.train_envs, other.train_envs)
            and same(self.val_envs, other.val_envs)
            and same(self.test_envs, other.test_envs)
        )


__all__ = ['Example', 'Environment', 'DatasetBundle', 'check_environments']

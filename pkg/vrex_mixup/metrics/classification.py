"""
Classification metrics: confusion matrices, per-class F1, macro F1 per domain and
its average across source domains.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..data.environments import Environment
from ..errors import ValidationError
from ..model.mlp import ModelParams, predict

WEIGHTING_MODES = ["unweighted", "size"]


@dataclass
class ConfusionMatrix:
    """Counts indexed [true class, predicted class]."""
    counts: np.ndarray

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)


def confusion(true_labels: Sequence[int], predicted_labels: Sequence[int],
              num_classes: int) -> ConfusionMatrix:
    """
    Tally (true, predicted) pairs.

    Raises:
        ValidationError: On length mismatch or a label outside [0, num_classes)
    """
    true_labels = np.asarray(true_labels, dtype=np.int64).reshape(-1)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64).reshape(-1)
    if len(true_labels) != len(predicted_labels):
        raise ValidationError(
            f"{len(true_labels)} true labels but {len(predicted_labels)} predictions"
        )
    for name, labels in (("true", true_labels), ("predicted", predicted_labels)):
        bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
        if bad.size:
            index = int(bad[0])
            raise ValidationError(
                f"{name} label {int(labels[index])} at index {index} outside [0, {num_classes})"
            )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    return ConfusionMatrix(counts)


def per_class_f1(cm: ConfusionMatrix) -> List[float]:
    """F1 per class, with every 0/0 precision, recall or F1 taken as 0."""
    scores = []
    for c in range(cm.num_classes):
        tp = int(cm.counts[c, c])
        fp = int(cm.counts[:, c].sum()) - tp
        fn = int(cm.counts[c, :].sum()) - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        if precision + recall > 0:
            scores.append(2 * precision * recall / (precision + recall))
        else:
            scores.append(0.0)
    return scores


def macro_f1(cm: ConfusionMatrix) -> float:
    """
    Unweighted mean of the per-class F1 scores over the classes that occur.

    A class absent from both the true labels and the predictions is left out,
    so a perfect classifier on a single-class domain scores 1.

    Raises:
        ValidationError: If the matrix holds no examples
    """
    if cm.total == 0:
        raise ValidationError("macro F1 of an empty confusion matrix")
    scores = per_class_f1(cm)
    occurring = cm.counts.sum(axis=0) + cm.counts.sum(axis=1) > 0
    present = [score for score, seen in zip(scores, occurring) if seen]
    return sum(present) / len(present)


@dataclass
class DomainReport:
    """Evaluation of one domain."""
    domain_id: int
    confusion: ConfusionMatrix
    f1_per_class: List[float]
    macro_f1: float
    n_examples: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain_id": self.domain_id,
            "confusion": self.confusion.counts.tolist(),
            "f1_per_class": list(self.f1_per_class),
            "macro_f1": self.macro_f1,
            "n_examples": self.n_examples,
        }

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "DomainReport":
        return cls(
            int(values["domain_id"]),
            ConfusionMatrix(np.array(values["confusion"], dtype=np.int64)),
            [float(v) for v in values["f1_per_class"]],
            float(values["macro_f1"]),
            int(values["n_examples"]),
        )


@dataclass
class EvalReport:
    """Per-domain results and their average across domains."""
    per_domain: Dict[int, DomainReport]
    average_macro_f1: float
    weighting: str = "unweighted"
    pooled_macro_f1: Optional[float] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "per_domain": [report.to_dict() for report in self.per_domain.values()],
            "average_macro_f1": self.average_macro_f1,
            "weighting": self.weighting,
            "pooled_macro_f1": self.pooled_macro_f1,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "EvalReport":
        domains = [DomainReport.from_dict(v) for v in values["per_domain"]]
        return cls(
            {d.domain_id: d for d in domains},
            float(values["average_macro_f1"]),
            values.get("weighting", "unweighted"),
            values.get("pooled_macro_f1"),
            dict(values.get("metadata", {})),
        )


def average_macro_f1(per_domain: Sequence[DomainReport], weighting: str = "unweighted") -> float:
    if weighting == "size":
        total = sum(d.n_examples for d in per_domain)
        return sum(d.n_examples * d.macro_f1 for d in per_domain) / total
    return sum(d.macro_f1 for d in per_domain) / len(per_domain)


def domain_report(domain_id: int, cm: ConfusionMatrix) -> DomainReport:
    return DomainReport(domain_id, cm, per_class_f1(cm), macro_f1(cm), cm.total)


def evaluate(params: ModelParams, envs: Sequence[Environment], weighting: str = "unweighted",
             pooled: bool = False) -> EvalReport:
    """
    Predict every domain, score it, and average the per-domain macro F1.

    Args:
        params: Trained model
        envs: Domains to evaluate, each scored separately
        weighting: ``unweighted`` mean over domains, or ``size``-weighted
        pooled: Also report macro F1 of the confusion matrix summed over domains

    Raises:
        ValidationError: If envs is empty or weighting is unknown
    """
    if not envs:
        raise ValidationError("evaluate needs at least one environment")
    if weighting not in WEIGHTING_MODES:
        raise ValidationError(f"weighting must be one of {WEIGHTING_MODES}, got {weighting!r}")
    num_classes = params.num_classes
    reports = {}
    for env in envs:
        cm = confusion(env.labels, predict(params, env.features), num_classes)
        reports[env.domain_id] = domain_report(env.domain_id, cm)

    pooled_score = None
    if pooled:
        total = ConfusionMatrix(sum(r.confusion.counts for r in reports.values()))
        pooled_score = macro_f1(total)
    return EvalReport(reports, average_macro_f1(list(reports.values()), weighting), weighting, pooled_score)


__all__ = [
    'ConfusionMatrix', 'DomainReport', 'EvalReport', 'confusion', 'per_class_f1', 'macro_f1',
    'average_macro_f1', 'domain_report', 'evaluate', 'WEIGHTING_MODES',
]

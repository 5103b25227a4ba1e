"""
Per-epoch training records, persisted as line-delimited JSON.
"""

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Union

import numpy as np

from ..errors import DataFormatError

PathLike = Union[str, Path]


@dataclass
class EpochRecord:
    """Epoch averages of the per-step quantities of one stage."""
    epoch: int
    stage: str
    env_risks: List[float]
    mean_risk: float
    risk_variance: float
    lam: float
    objective: float
    wall_time: float = 0.0

    def to_dict(self) -> Dict[str, Any]:
        values = asdict(self)
        values["lambda"] = values.pop("lam")
        return values

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "EpochRecord":
        return cls(
            epoch=int(values["epoch"]),
            stage=str(values["stage"]),
            env_risks=[float(v) for v in values["env_risks"]],
            mean_risk=float(values["mean_risk"]),
            risk_variance=float(values["risk_variance"]),
            lam=float(values["lambda"]),
            objective=float(values["objective"]),
            wall_time=float(values.get("wall_time", 0.0)),
        )


@dataclass
class StepRecord:
    """What a step hook sees after each optimizer update."""
    stage: str
    epoch: int
    step: int
    env_risks: List[float]
    objective: float
    batch: Optional[Any] = None


@dataclass
class TrainLog:
    records: List[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EpochRecord]:
        return iter(self.records)

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def extend(self, other: "TrainLog") -> None:
        self.records.extend(other.records)

    def stage(self, name: str) -> "TrainLog":
        return TrainLog([r for r in self.records if r.stage == name])

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r.to_dict(), sort_keys=True) + "\n" for r in self.records)

    def write(self, path: PathLike) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: PathLike) -> "TrainLog":
        """
        Parse a JSONL training log.

        Raises:
            DataFormatError: On a line that is not UTF-8 or not a valid epoch record
        """
        records = []
        with open(path, "rb") as handle:
            for line_number, raw in enumerate(handle, start=1):
                try:
                    line = raw.decode("utf-8")
                except UnicodeDecodeError as exc:
                    raise DataFormatError(f"{path}: not UTF-8 text ({exc.reason})", line_number) from None
                if not line.strip():
                    continue
                try:
                    records.append(EpochRecord.from_dict(json.loads(line)))
                except (KeyError, TypeError, ValueError) as exc:
                    raise DataFormatError(f"{path}: not an epoch record ({exc})", line_number) from exc
        return cls(records)


class EpochAccumulator:
    """Running sums of per-step quantities within one epoch."""

    def __init__(self):
        self.steps = 0
        self._env_risks = None
        self._mean = 0.0
        self._variance = 0.0
        self._objective = 0.0

    def add(self, env_risks: np.ndarray, mean: float, variance: float, objective: float) -> None:
        env_risks = np.asarray(env_risks, dtype=np.float64)
        self._env_risks = env_risks.copy() if self._env_risks is None else self._env_risks + env_risks
        self._mean += mean
        self._variance += variance
        self._objective += objective
        self.steps += 1

    def record(self, epoch: int, stage: str, lam: float, wall_time: float) -> EpochRecord:
        n = max(self.steps, 1)
        env_risks = [] if self._env_risks is None else (self._env_risks / n).tolist()
        return EpochRecord(
            epoch=epoch,
            stage=stage,
            env_risks=env_risks,
            mean_risk=self._mean / n,
            risk_variance=self._variance / n,
            lam=float(lam),
            objective=self._objective / n,
            wall_time=wall_time,
        )


__all__ = ['EpochRecord', 'StepRecord', 'TrainLog', 'EpochAccumulator']

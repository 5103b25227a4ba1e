"""
Checkpoint persistence.

A checkpoint is one JSON document holding the config echo, the stage and the
number of epochs completed in it, every parameter tensor as shape plus flat
values, and the optimizer moments and step count. Floats are written in their
shortest round-trip form, so loading restores every bit.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np

from ..errors import CheckpointError
from ..model.mlp import ModelParams
from .optimizer import OptimizerState

CHECKPOINT_VERSION = 1
STAGES = ("stage1", "stage2", "final")

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    config: Dict[str, Any]
    stage: str
    epoch: int
    params: ModelParams
    optimizer_state: OptimizerState
    extra: Dict[str, Any] = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def equals(self, other: "Checkpoint") -> bool:
        """Exact equality, bit for bit on every array."""
        if (self.version, self.stage, self.epoch, self.config, self.extra) != \
                (other.version, other.stage, other.epoch, other.config, other.extra):
            return False
        if self.optimizer_state.step != other.optimizer_state.step:
            return False
        pairs = [(self.params.named_tensors(), other.params.named_tensors()),
                 (self.optimizer_state.first_moment, other.optimizer_state.first_moment),
                 (self.optimizer_state.second_moment, other.optimizer_state.second_moment)]
        for mine, theirs in pairs:
            if mine.keys() != theirs.keys():
                return False
            if not all(np.array_equal(mine[k], theirs[k]) for k in mine):
                return False
        return True


def _encode_tensors(named: Dict[str, np.ndarray]) -> list:
    return [
        {"name": name, "shape": list(value.shape), "values": value.reshape(-1).tolist()}
        for name, value in named.items()
    ]


def _decode_tensors(entries: list) -> Dict[str, np.ndarray]:
    named = {}
    for entry in entries:
        values = np.array(entry["values"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if values.size != int(np.prod(shape)):
            raise ValueError(f"{entry['name']}: {values.size} values for shape {list(shape)}")
        named[entry["name"]] = values.reshape(shape)
    return named


def checkpoint_to_dict(checkpoint: Checkpoint) -> Dict[str, Any]:
    state = checkpoint.optimizer_state
    return {
        "version": checkpoint.version,
        "config": checkpoint.config,
        "stage": checkpoint.stage,
        "epoch": checkpoint.epoch,
        "layers": _encode_tensors(checkpoint.params.named_tensors()),
        "optimizer": {
            "step": state.step,
            "first_moment": _encode_tensors(state.first_moment),
            "second_moment": _encode_tensors(state.second_moment),
        },
        "extra": checkpoint.extra,
    }


def checkpoint_from_dict(values: Dict[str, Any]) -> Checkpoint:
    if values.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {values.get('version')!r}")
    if values["stage"] not in STAGES:
        raise ValueError(f"unknown stage {values['stage']!r}")
    optimizer = values["optimizer"]
    return Checkpoint(
        config=values["config"],
        stage=values["stage"],
        epoch=int(values["epoch"]),
        params=ModelParams.from_named(_decode_tensors(values["layers"])),
        optimizer_state=OptimizerState(
            int(optimizer["step"]),
            _decode_tensors(optimizer["first_moment"]),
            _decode_tensors(optimizer["second_moment"]),
        ),
        extra=values.get("extra", {}),
        version=values["version"],
    )


def save_checkpoint(checkpoint: Checkpoint, path: PathLike) -> Path:
    """
    Write ``checkpoint`` to ``path``.

    Raises:
        CheckpointError: If the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(checkpoint_to_dict(checkpoint), handle)
            handle.write("\n")
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint: {exc.strerror or exc}", str(path)) from exc
    return path


def load_checkpoint(path: PathLike) -> Checkpoint:
    """
    Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: If the file is missing, unreadable or malformed
    """
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return checkpoint_from_dict(json.load(handle))
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint: {exc.strerror or exc}", str(path)) from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}", str(path)) from exc


__all__ = ['Checkpoint', 'CHECKPOINT_VERSION', 'STAGES', 'checkpoint_to_dict', 'checkpoint_from_dict',
           'save_checkpoint', 'load_checkpoint']

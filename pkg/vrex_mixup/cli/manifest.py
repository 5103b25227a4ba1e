"""
Run manifests: what a command was given and everything it wrote.
"""

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from config import TOOL_VERSION
from ..errors import SchemaError

MANIFEST_FILE = "manifest.json"

PathLike = Union[str, Path]


@dataclass
class RunManifest:
    """
    Inputs and outputs of one command; artifact paths are relative to the output
    directory. ``resume`` names the checkpoint a training run continued from.
    """
    command: str
    config: Dict[str, Any]
    seed: Optional[int] = None
    config_path: Optional[str] = None
    data: Dict[str, Any] = field(default_factory=dict)
    artifacts: Dict[str, str] = field(default_factory=dict)
    tool_version: str = TOOL_VERSION
    resume: Optional[str] = None

    def add_artifact(self, name: str, path: PathLike, out_dir: PathLike) -> None:
        path, out_dir = Path(path), Path(out_dir)
        try:
            self.artifacts[name] = path.relative_to(out_dir).as_posix()
        except ValueError:
            self.artifacts[name] = path.as_posix()

    def write(self, out_dir: PathLike) -> Path:
        path = Path(out_dir) / MANIFEST_FILE
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path

    @classmethod
    def read(cls, path: PathLike) -> "RunManifest":
        path = Path(path)
        if path.is_dir():
            path = path / MANIFEST_FILE
        try:
            values = json.loads(path.read_text(encoding="utf-8"))
            return cls(**values)
        except OSError as exc:
            raise SchemaError(f"cannot read manifest {path}: {exc.strerror or exc}") from exc
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{path} is not a run manifest: {exc}") from exc


__all__ = ['RunManifest', 'MANIFEST_FILE']

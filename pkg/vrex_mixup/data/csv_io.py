"""
CSV ingestion and export of multi-environment datasets.

Format: UTF-8, LF line endings, header ``domain_id,label,f0,...,f{d-1}``,
comma separated, no quoting, no trailing comma.
"""

from collections import OrderedDict
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np

from utilities.logger import get_logger
from ..errors import DataFormatError, SchemaError, ValidationError
from .environments import DatasetBundle, Environment

logger = get_logger("vrex_mixup.data")

PathLike = Union[str, Path]
SPLIT_FILES = {"train": "train.csv", "val": "val.csv", "test": "test.csv"}


def csv_header(feature_dim: int) -> str:
    return ",".join(["domain_id", "label"] + [f"f{k}" for k in range(feature_dim)])


def format_environments(envs: Sequence[Environment], feature_dim: int) -> str:
    """Render environments as CSV text; floats use shortest round-trip form."""
    lines = [csv_header(feature_dim)]
    for env in envs:
        for row, label in zip(env.features, env.labels):
            lines.append(",".join([str(env.domain_id), str(int(label))] + [repr(float(v)) for v in row]))
    return "\n".join(lines) + "\n"


def write_csv(path: PathLike, envs: Sequence[Environment], feature_dim: int) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(format_environments(envs, feature_dim))
    return path


def _decode_line(raw: bytes, path: Path, line_number: int) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path} is not UTF-8 text ({exc.reason} at byte {exc.start})", line_number) from None


def _read_lines(path: Path) -> List[str]:
    with open(path, "rb") as handle:
        raw_lines = handle.read().split(b"\n")
    if raw_lines and raw_lines[-1] == b"":
        raw_lines.pop()
    return [_decode_line(raw, path, line_number) for line_number, raw in enumerate(raw_lines, start=1)]


def _parse_int(token: str, name: str, line_number: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise DataFormatError(f"{name} {token!r} is not an integer", line_number) from None


def load_csv(path: PathLike, feature_dim: int, num_classes: int) -> List[Environment]:
    """
    Read a dataset file and group its rows by domain id.

    Args:
        path: CSV file in the documented format
        feature_dim: Expected number of feature columns
        num_classes: Labels must lie in [0, num_classes)

    Returns:
        Environments in order of first appearance, rows in file order

    Raises:
        SchemaError: If the header or a row width does not match feature_dim
        DataFormatError: If a row cannot be decoded or parsed (message names the line)
        ValidationError: If a label or domain id is out of range
    """
    path = Path(path)
    lines = _read_lines(path)
    if not lines:
        raise SchemaError(f"{path} is empty; expected header {csv_header(feature_dim)!r}")

    expected_header = csv_header(feature_dim)
    if lines[0].rstrip("\r") != expected_header:
        width = len(lines[0].split(",")) - 2
        raise SchemaError(
            f"{path} header has {width} feature columns, expected {feature_dim} "
            f"({expected_header!r})"
        )

    grouped: Dict[int, List[tuple]] = OrderedDict()
    for line_number, line in enumerate(lines[1:], start=2):
        tokens = line.rstrip("\r").split(",")
        if len(tokens) != feature_dim + 2:
            raise SchemaError(
                f"{path} line {line_number} has {len(tokens) - 2} feature columns, expected {feature_dim}"
            )
        domain_id = _parse_int(tokens[0], "domain_id", line_number)
        label = _parse_int(tokens[1], "label", line_number)
        if domain_id < 0:
            raise ValidationError(f"{path} line {line_number}: domain_id {domain_id} is negative")
        if not 0 <= label < num_classes:
            raise ValidationError(
                f"{path} line {line_number}: label {label} outside [0, {num_classes})"
            )
        try:
            features = [float(token) for token in tokens[2:]]
        except ValueError:
            raise DataFormatError(f"non-numeric feature value in {path}", line_number) from None
        grouped.setdefault(domain_id, []).append((features, label))

    envs = [
        Environment(domain_id, np.array([r[0] for r in rows], dtype=np.float64).reshape(len(rows), feature_dim),
                    np.array([r[1] for r in rows], dtype=np.int64))
        for domain_id, rows in grouped.items()
    ]
    logger.debug(f"Loaded {sum(len(e) for e in envs)} rows in {len(envs)} environments from {path}")
    return envs


def save_bundle(bundle: DatasetBundle, out_dir: PathLike) -> Dict[str, Path]:
    """Write train/val/test CSV files; returns the written paths by split."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    for split, envs in (("train", bundle.train_envs), ("val", bundle.val_envs), ("test", bundle.test_envs)):
        if split == "test" and not envs:
            continue
        written[split] = write_csv(out_dir / SPLIT_FILES[split], envs, bundle.feature_dim)
    return written


def load_bundle(data_dir: PathLike, feature_dim: int, num_classes: int = 2) -> DatasetBundle:
    """Read a directory written by ``save_bundle``; the test file is optional."""
    data_dir = Path(data_dir)
    train = load_csv(data_dir / SPLIT_FILES["train"], feature_dim, num_classes)
    val = load_csv(data_dir / SPLIT_FILES["val"], feature_dim, num_classes)
    test_path = data_dir / SPLIT_FILES["test"]
    test = load_csv(test_path, feature_dim, num_classes) if test_path.exists() else []
    return DatasetBundle(train, val, feature_dim, num_classes, test)


def infer_feature_dim(path: PathLike) -> int:
    """Read the feature width from a dataset file header."""
    path = Path(path)
    with open(path, "rb") as handle:
        header = _decode_line(handle.readline(), path, 1).rstrip("\r\n")
    columns = header.split(",")
    if columns[:2] != ["domain_id", "label"] or len(columns) < 3:
        raise SchemaError(f"{path} does not start with a domain_id,label,f0,... header")
    return len(columns) - 2


__all__ = ['load_csv', 'write_csv', 'format_environments', 'save_bundle', 'load_bundle',
           'infer_feature_dim', 'csv_header', 'SPLIT_FILES']

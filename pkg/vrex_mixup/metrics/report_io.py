"""
EvalReport serialization: a JSON document mirroring the report and a flat
per-domain CSV for plotting.
"""

import json
from pathlib import Path
from typing import Union

import pandas as pd

from ..errors import SchemaError
from .classification import EvalReport

PathLike = Union[str, Path]
FLOAT_FORMAT = "%.17g"


def report_frame(report: EvalReport) -> pd.DataFrame:
    """One row per domain: domain_id, macro_f1, f1_class0..f1_class{C-1}, n."""
    rows = []
    for domain in report.per_domain.values():
        row = {"domain_id": domain.domain_id, "macro_f1": domain.macro_f1}
        for c, score in enumerate(domain.f1_per_class):
            row[f"f1_class{c}"] = score
        row["n"] = domain.n_examples
        rows.append(row)
    return pd.DataFrame(rows)


def write_report_json(report: EvalReport, path: PathLike) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(report.to_dict(), handle, indent=2)
        handle.write("\n")
    return path


def read_report_json(path: PathLike) -> EvalReport:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return EvalReport.from_dict(json.load(handle))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path} is not an evaluation report: {exc}") from exc


def write_report_csv(report: EvalReport, path: PathLike) -> Path:
    path = Path(path)
    report_frame(report).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


__all__ = ['report_frame', 'write_report_json', 'read_report_json', 'write_report_csv']

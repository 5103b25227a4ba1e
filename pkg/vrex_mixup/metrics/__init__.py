"""
Evaluation: confusion matrices, F1 scores and cross-domain averages.
"""

from .classification import (
    ConfusionMatrix, DomainReport, EvalReport, confusion, per_class_f1, macro_f1,
    average_macro_f1, domain_report, evaluate, WEIGHTING_MODES,
)
from .report_io import report_frame, write_report_json, read_report_json, write_report_csv

__all__ = [
    'ConfusionMatrix', 'DomainReport', 'EvalReport', 'confusion', 'per_class_f1', 'macro_f1',
    'average_macro_f1', 'domain_report', 'evaluate', 'WEIGHTING_MODES',
    'report_frame', 'write_report_json', 'read_report_json', 'write_report_csv',
]

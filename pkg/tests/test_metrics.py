"""
Tests for confusion matrices, macro F1, domain averaging and report files.
"""

import json

import numpy as np
import pandas as pd
import pytest

from vrex_mixup.data import Environment
from vrex_mixup.errors import SchemaError, ValidationError
from vrex_mixup.metrics import (
    ConfusionMatrix, EvalReport, confusion, domain_report, evaluate, macro_f1, per_class_f1,
    read_report_json, write_report_csv, write_report_json,
)
from vrex_mixup.model import ModelParams

# Predicts class 1 for positive x and class 0 for negative x.
SIGN_MODEL = ModelParams([(np.array([[-1.0, 1.0]]), np.zeros(2))])


def _brute_force_macro_f1(true, pred, num_classes):
    scores = []
    for c in range(num_classes):
        tp = fp = fn = 0
        for t, p in zip(true, pred):
            if t == c and p == c:
                tp += 1
            elif p == c:
                fp += 1
            elif t == c:
                fn += 1
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return sum(scores) / len(scores)


class TestConfusion:
    def test_perfect_predictions_are_diagonal(self):
        cm = confusion([0, 1, 2, 1], [0, 1, 2, 1], 3)
        np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 1]))

    def test_hand_tally(self):
        np.testing.assert_array_equal(confusion([0, 0, 1, 1], [0, 1, 1, 1], 2).counts, [[1, 1], [0, 2]])

    def test_empty(self):
        cm = confusion([], [], 2)
        np.testing.assert_array_equal(cm.counts, np.zeros((2, 2)))
        assert cm.total == 0

    def test_out_of_range_names_index(self):
        with pytest.raises(ValidationError, match="index 2"):
            confusion([0, 1, 0], [0, 1, 3], 2)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            confusion([0, 1], [0], 2)


class TestMacroF1:
    def test_diagonal_is_one(self):
        assert macro_f1(ConfusionMatrix(np.diag([3, 4]))) == 1.0

    def test_hand_formula(self):
        cm = ConfusionMatrix(np.array([[1, 1], [0, 2]]))
        f1 = per_class_f1(cm)
        assert f1[0] == pytest.approx(2 / 3, abs=1e-15)
        assert f1[1] == pytest.approx(0.8, abs=1e-15)
        assert macro_f1(cm) == pytest.approx(11 / 15, abs=1e-15)

    def test_all_class_zero_on_validation_counts(self):
        cm = confusion([0] * 180 + [1] * 128, [0] * 308, 2)
        f1 = per_class_f1(cm)
        assert f1[0] == pytest.approx(360 / 488, abs=1e-12)
        assert f1[1] == 0.0
        assert macro_f1(cm) == pytest.approx(0.3689, abs=1e-4)

    def test_single_class_perfect_domain_scores_one(self):
        cm = confusion([0, 0, 0], [0, 0, 0], 2)
        np.testing.assert_array_equal(cm.counts, [[3, 0], [0, 0]])
        assert macro_f1(cm) == 1.0
        assert per_class_f1(cm) == [1.0, 0.0]

    def test_absent_class_predicted_counts(self):
        # class 1 never occurs in the labels but is predicted once
        assert macro_f1(confusion([0, 0, 0], [0, 0, 1], 2)) == pytest.approx(0.4, abs=1e-15)

    def test_three_classes_one_absent(self):
        assert macro_f1(confusion([0, 1, 1], [0, 1, 0], 3)) == pytest.approx(2 / 3, abs=1e-15)

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValidationError, match="empty"):
            macro_f1(ConfusionMatrix(np.zeros((2, 2), dtype=np.int64)))

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            num_classes = int(rng.integers(2, 5))
            true = rng.integers(0, num_classes, size=1000)
            pred = rng.integers(0, num_classes, size=1000)
            assert macro_f1(confusion(true, pred, num_classes)) == \
                _brute_force_macro_f1(true.tolist(), pred.tolist(), num_classes)

    def test_class_permutation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            true = rng.integers(0, 3, size=200)
            pred = rng.integers(0, 3, size=200)
            perm = rng.permutation(3)
            base = macro_f1(confusion(true, pred, 3))
            assert macro_f1(confusion(perm[true], perm[pred], 3)) == pytest.approx(base, abs=1e-15)

    def test_range(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            score = macro_f1(confusion(rng.integers(0, 2, 50), rng.integers(0, 2, 50), 2))
            assert 0.0 <= score <= 1.0


class TestEvaluate:
    def _domains(self):
        perfect = Environment(0, np.array([[-1.0], [1.0]]), np.array([0, 1]))
        half = Environment(1, np.array([[-1.0], [1.0], [1.0], [-1.0]]), np.array([0, 1, 0, 1]))
        return perfect, half

    def test_two_domains_average(self):
        report = evaluate(SIGN_MODEL, list(self._domains()))
        assert report.per_domain[0].macro_f1 == 1.0
        assert report.per_domain[1].macro_f1 == 0.5
        assert report.average_macro_f1 == 0.75
        assert report.pooled_macro_f1 is None

    def test_single_domain(self):
        perfect, _ = self._domains()
        report = evaluate(SIGN_MODEL, [perfect])
        assert report.average_macro_f1 == report.per_domain[0].macro_f1

    def test_domain_order_does_not_matter(self):
        perfect, half = self._domains()
        assert evaluate(SIGN_MODEL, [perfect, half]).average_macro_f1 == \
            evaluate(SIGN_MODEL, [half, perfect]).average_macro_f1

    def test_size_weighting_and_pooled(self):
        report = evaluate(SIGN_MODEL, list(self._domains()), weighting="size", pooled=True)
        assert report.average_macro_f1 == pytest.approx((2 * 1.0 + 4 * 0.5) / 6, abs=1e-15)
        # pooled counts: [[2, 1], [1, 2]]
        assert report.pooled_macro_f1 == pytest.approx(2 / 3, abs=1e-15)

    def test_unknown_weighting(self):
        with pytest.raises(ValidationError, match="weighting"):
            evaluate(SIGN_MODEL, list(self._domains()), weighting="median")

    def test_no_environments(self):
        with pytest.raises(ValidationError):
            evaluate(SIGN_MODEL, [])


class TestReportFiles:
    def _report(self):
        first = domain_report(0, confusion([0, 0, 1, 1], [0, 1, 1, 1], 2))
        second = domain_report(3, confusion([0, 1, 1], [0, 1, 0], 2))
        return EvalReport({0: first, 3: second}, (first.macro_f1 + second.macro_f1) / 2)

    def test_json_round_trip(self, tmp_path):
        report = self._report()
        loaded = read_report_json(write_report_json(report, tmp_path / "report.json"))
        assert loaded.average_macro_f1 == report.average_macro_f1
        assert list(loaded.per_domain) == [0, 3]
        np.testing.assert_array_equal(loaded.per_domain[0].confusion.counts, [[1, 1], [0, 2]])

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "report.json"
        path.write_text(json.dumps({"per_domain": [{"domain_id": 0}]}))
        with pytest.raises(SchemaError):
            read_report_json(path)

    def test_csv_columns_and_exact_floats(self, tmp_path):
        report = self._report()
        path = write_report_csv(report, tmp_path / "report.csv")
        frame = pd.read_csv(path, float_precision="round_trip")
        assert list(frame.columns) == ["domain_id", "macro_f1", "f1_class0", "f1_class1", "n"]
        assert frame["macro_f1"].tolist() == [d.macro_f1 for d in report.per_domain.values()]
        assert frame["n"].tolist() == [4, 3]

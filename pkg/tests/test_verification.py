"""
Tests for the gradient verification suite, including its sensitivity to a broken op.
"""

import numpy as np
import pytest

from vrex_mixup.engine import ops
from vrex_mixup.verification import SUITE, run_gradcheck_suite


def _relu_with_wrong_gradient(a):
    mask = a.value > 0
    # Passes the gradient everywhere instead of only where the input is positive.
    return a.tape.record(np.where(mask, a.value, 0.0), (a,), lambda grad: (grad,))


def test_suite_covers_every_op_and_the_mlp():
    names = [name for name, _ in SUITE]
    for op in ("matmul", "add", "add_bias", "scale", "stack", "relu", "softmax_cross_entropy",
               "reduce_mean", "variance_scalar", "mlp_loss"):
        assert op in names


def test_suite_passes():
    cases = run_gradcheck_suite(trials=10, seed=0)
    failures = {c.name: c.max_relative_error for c in cases if not c.passed}
    assert not failures


def test_suite_passes_across_seeds():
    for seed in range(1, 4):
        assert all(case.passed for case in run_gradcheck_suite(trials=3, seed=seed))


def test_injected_relu_fault_is_detected(monkeypatch):
    monkeypatch.setattr(ops, "relu", _relu_with_wrong_gradient)
    cases = {case.name: case for case in run_gradcheck_suite(trials=5, seed=0)}
    assert not cases["relu"].passed
    assert not cases["mlp_loss"].passed
    assert cases["matmul"].passed


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(20))
def test_suite_passes_at_full_trial_count(seed):
    cases = run_gradcheck_suite(trials=100, seed=seed)
    failures = {c.name: c.max_relative_error for c in cases if not c.passed}
    assert not failures

"""
Gradient verification suite: every differentiable op and a full MLP loss checked
against central finite differences on seeded random inputs.
"""

from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from utilities.structured_logger import get_structured_logger
from .engine import ops
from .engine.gradcheck import TracedFunction, grad_check
from .engine.tape import Tape, TracedValue
from .model.mlp import BoundParams, ModelConfig, ModelParams, forward, init_params
from .objectives.vrex import RiskVector, vrex_objective

structured_logger = get_structured_logger("gradcheck")

# Inputs to relu are kept at least this far from the kink.
KINK_MARGIN = 1e-2
MLP_SHAPE = ModelConfig(input_dim=4, hidden_dims=[5, 5], num_classes=3)
MLP_BATCH = 6

CaseFactory = Callable[[np.random.Generator], List[Tuple[TracedFunction, np.ndarray]]]


@dataclass
class GradCheckCase:
    """Worst relative error of one check over all trials."""
    name: str
    max_relative_error: float
    trials: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.max_relative_error < self.tolerance)


def _project(tape: Tape, out: TracedValue, weights: np.ndarray) -> TracedValue:
    """Reduce a matrix to a scalar through a fixed random column."""
    return ops.reduce_mean(ops.matmul(out, tape.constant(weights)))


def _away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    values = rng.normal(size=shape)
    return np.sign(values) * (np.abs(values) + KINK_MARGIN)


def _scalars(tape: Tape, x: TracedValue, columns: np.ndarray) -> List[TracedValue]:
    """One scalar per column: mean of x @ column."""
    return [ops.reduce_mean(ops.matmul(x, tape.constant(columns[:, [j]]))) for j in range(columns.shape[1])]


def _matmul_cases(rng):
    left, right, weights = rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), rng.normal(size=(2, 1))
    return [
        (lambda t, x: _project(t, ops.matmul(x, t.constant(right)), weights), left),
        (lambda t, x: _project(t, ops.matmul(t.constant(left), x), weights), right),
    ]


def _add_cases(rng):
    other, weights = rng.normal(size=(3, 4)), rng.normal(size=(4, 1))
    return [(lambda t, x: _project(t, ops.add(x, t.constant(other)), weights), rng.normal(size=(3, 4)))]


def _add_bias_cases(rng):
    matrix, bias, weights = rng.normal(size=(5, 3)), rng.normal(size=3), rng.normal(size=(3, 1))
    return [
        (lambda t, x: _project(t, ops.add_bias(x, t.constant(bias)), weights), matrix),
        (lambda t, x: _project(t, ops.add_bias(t.constant(matrix), x), weights), bias),
    ]


def _scale_cases(rng):
    factor, weights = float(rng.uniform(-3, 3)), rng.normal(size=(4, 1))
    return [(lambda t, x: _project(t, ops.scale(x, factor), weights), rng.normal(size=(2, 4)))]


def _stack_cases(rng):
    columns = rng.normal(size=(4, int(rng.integers(2, 7))))
    return [(lambda t, x: ops.variance_scalar(ops.stack(_scalars(t, x, columns))), rng.normal(size=(3, 4)))]


def _relu_cases(rng):
    weights = rng.normal(size=(5, 1))
    return [(lambda t, x: _project(t, ops.relu(x), weights), _away_from_zero(rng, (4, 5)))]


def _softmax_cross_entropy_cases(rng):
    batch, classes = int(rng.integers(1, 6)), int(rng.integers(2, 5))
    targets = rng.dirichlet(np.ones(classes), size=batch)
    return [(lambda t, x: ops.softmax_cross_entropy(x, targets), rng.normal(size=(batch, classes)))]


def _reduce_mean_cases(rng):
    return [(lambda t, x: ops.reduce_mean(x), rng.normal(size=int(rng.integers(1, 10))))]


def _variance_cases(rng):
    n = int(rng.integers(2, 9))
    return [
        (lambda t, x: ops.variance_scalar(x, "population"), rng.normal(size=n)),
        (lambda t, x: ops.variance_scalar(x, "sample"), rng.normal(size=n)),
    ]


def _vrex_objective_cases(rng):
    columns = rng.normal(size=(4, int(rng.integers(2, 9))))
    lam = float(rng.uniform(0, 100))

    def f(t, x):
        risks = RiskVector(_scalars(t, x, columns))
        return vrex_objective(risks, lam)
    return [(f, rng.normal(size=(3, 4)))]


def _preactivations_clear(params: ModelParams, batch: np.ndarray) -> bool:
    hidden = batch
    for weight, bias in params.layers[:-1]:
        pre = hidden @ weight + bias
        if np.abs(pre).min() <= KINK_MARGIN:
            return False
        hidden = np.maximum(pre, 0.0)
    return True


def _mlp_cases(rng):
    """Loss of a 2-hidden-layer MLP, differentiated w.r.t. each parameter tensor in turn."""
    while True:
        seed = int(rng.integers(0, 2 ** 32))
        params = init_params(ModelConfig(MLP_SHAPE.input_dim, list(MLP_SHAPE.hidden_dims),
                                         MLP_SHAPE.num_classes, "he", seed))
        params = ModelParams([(w, rng.normal(scale=0.1, size=b.shape)) for w, b in params.layers])
        batch = rng.normal(size=(MLP_BATCH, MLP_SHAPE.input_dim))
        if _preactivations_clear(params, batch):
            break
    labels = rng.integers(0, MLP_SHAPE.num_classes, size=MLP_BATCH)
    targets = np.eye(MLP_SHAPE.num_classes)[labels]
    flat = [tensor for pair in params.layers for tensor in pair]

    def loss_wrt(position):
        def f(t, x):
            traced = [x if i == position else t.constant(v) for i, v in enumerate(flat)]
            bound = BoundParams(list(zip(traced[0::2], traced[1::2])))
            return ops.softmax_cross_entropy(forward(bound, batch), targets)
        return f
    return [(loss_wrt(i), flat[i]) for i in range(len(flat))]


SUITE: List[Tuple[str, CaseFactory]] = [
    ("matmul", _matmul_cases),
    ("add", _add_cases),
    ("add_bias", _add_bias_cases),
    ("scale", _scale_cases),
    ("stack", _stack_cases),
    ("relu", _relu_cases),
    ("softmax_cross_entropy", _softmax_cross_entropy_cases),
    ("reduce_mean", _reduce_mean_cases),
    ("variance_scalar", _variance_cases),
    ("vrex_objective", _vrex_objective_cases),
    ("mlp_loss", _mlp_cases),
]


def run_gradcheck_suite(trials: int = 100, seed: int = 0, h: float = 1e-5,
                        tolerance: float = 1e-4) -> List[GradCheckCase]:
    """
    Check every case on ``trials`` seeded random inputs.

    Args:
        trials: Random inputs per case
        seed: Root seed; each case draws from its own child stream
        h: Finite-difference step
        tolerance: Pass threshold on the maximum relative error

    Returns:
        One GradCheckCase per suite entry, in suite order
    """
    results = []
    for index, (name, factory) in enumerate(SUITE):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), index]))
        worst = 0.0
        for _ in range(trials):
            for f, point in factory(rng):
                worst = max(worst, grad_check(f, point, h))
        case = GradCheckCase(name, worst, trials, tolerance)
        structured_logger.info("Gradient check", case=name, max_relative_error=worst, passed=case.passed)
        results.append(case)
    return results


__all__ = ['GradCheckCase', 'SUITE', 'run_gradcheck_suite', 'KINK_MARGIN']

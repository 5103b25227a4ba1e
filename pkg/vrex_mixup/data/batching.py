"""
Environment-stratified minibatching.

Every step yields exactly one batch per environment. Steps per epoch are set by
the largest environment, which is visited exactly once; smaller environments
wrap around their own shuffled order.
"""

import math
from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np

from ..errors import ValidationError
from .environments import Environment


@dataclass
class EnvBatch:
    """Rows drawn from one environment for one step."""
    domain_id: int
    features: np.ndarray
    labels: np.ndarray
    indices: np.ndarray


BatchGroup = List[EnvBatch]


def epoch_seed(run_seed: int, epoch_index: int) -> int:
    """Deterministic per-epoch shuffle seed derived from the run seed."""
    return int(np.random.SeedSequence([int(run_seed), int(epoch_index)]).generate_state(1, np.uint64)[0])


def steps_per_epoch(envs: Sequence[Environment], batch_size: int) -> int:
    return math.ceil(max(len(env) for env in envs) / batch_size)


def stratified_batches(envs: Sequence[Environment], batch_size: int,
                       epoch_seed: int) -> Iterator[BatchGroup]:
    """
    Iterate one epoch of per-step batch groups.

    Args:
        envs: Environments in bundle order
        batch_size: Rows per environment per step (the final step may be shorter)
        epoch_seed: Seed for this epoch's independent per-environment shuffles

    Yields:
        Lists with one EnvBatch per environment, in ``envs`` order

    Raises:
        ValidationError: If there are no environments or batch_size < 1
    """
    if not envs:
        raise ValidationError("stratified batching needs at least one environment")
    if batch_size < 1:
        raise ValidationError(f"batch_size must be >= 1, got {batch_size}")

    children = np.random.SeedSequence(int(epoch_seed)).spawn(len(envs))
    orders = [np.random.default_rng(child).permutation(len(env)) for env, child in zip(envs, children)]
    largest = max(len(env) for env in envs)
    n_steps = math.ceil(largest / batch_size)

    for step in range(n_steps):
        start = step * batch_size
        positions = np.arange(start, min(start + batch_size, largest))
        group = []
        for env, order in zip(envs, orders):
            rows = order[positions % len(env)]
            group.append(EnvBatch(env.domain_id, env.features[rows], env.labels[rows], rows))
        yield group


__all__ = ['EnvBatch', 'BatchGroup', 'stratified_batches', 'steps_per_epoch', 'epoch_seed']

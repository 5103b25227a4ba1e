"""
Shared fixtures: a small seeded benchmark bundle and a fast training config.
"""

import pytest

from vrex_mixup.data import SpuriousSpec, generate_spurious_environments
from vrex_mixup.model import ModelConfig
from vrex_mixup.objectives import MixupConfig, VRExConfig
from vrex_mixup.training import TrainConfig


@pytest.fixture
def small_spec():
    return SpuriousSpec(train_sizes=[40, 30, 35, 25], val_sizes=[20, 20, 20, 20], test_size=50, seed=3)


@pytest.fixture
def small_bundle(small_spec):
    return generate_spurious_environments(small_spec)


@pytest.fixture
def tiny_config():
    return TrainConfig(
        model=ModelConfig(input_dim=6, hidden_dims=[8, 8], seed=1),
        vrex=VRExConfig(lambda_max=10.0, warmup_epochs=2),
        mixup=MixupConfig(alpha=0.2, seed=1),
        stage1_epochs=3,
        stage2_epochs=2,
        batch_size=16,
        run_seed=7,
    )

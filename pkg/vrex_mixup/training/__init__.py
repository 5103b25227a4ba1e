"""
Two-stage training: configuration, optimizers, checkpoints, logs and the stage loops.
"""

from .config import TrainConfig, OPTIMIZERS, METHODS, flatten_dict, coerce_value, from_flat, apply_method, seeded
from .optimizer import OptimizerConfig, OptimizerState, init_optimizer_state, optimizer_step
from .checkpoint import (
    Checkpoint, CHECKPOINT_VERSION, STAGES, checkpoint_to_dict, checkpoint_from_dict,
    save_checkpoint, load_checkpoint,
)
from .train_log import EpochRecord, StepRecord, TrainLog, EpochAccumulator
from .trainer import (
    TwoStageResult, EarlyStopper, optimizer_config, mixup_step_seed, check_compatible,
    run_stage1, run_stage2, train_stage1_vrex, train_stage2_mixup, run_two_stage,
)

__all__ = [
    'TrainConfig', 'OPTIMIZERS', 'METHODS', 'flatten_dict', 'coerce_value', 'from_flat',
    'apply_method', 'seeded',
    'OptimizerConfig', 'OptimizerState', 'init_optimizer_state', 'optimizer_step',
    'Checkpoint', 'CHECKPOINT_VERSION', 'STAGES', 'checkpoint_to_dict', 'checkpoint_from_dict',
    'save_checkpoint', 'load_checkpoint',
    'EpochRecord', 'StepRecord', 'TrainLog', 'EpochAccumulator',
    'TwoStageResult', 'EarlyStopper', 'optimizer_config', 'mixup_step_seed', 'check_compatible',
    'run_stage1', 'run_stage2', 'train_stage1_vrex', 'train_stage2_mixup', 'run_two_stage',
]

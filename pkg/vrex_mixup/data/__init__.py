"""
Multi-environment data: containers, synthetic generation, CSV I/O and batching.
"""

from .environments import Example, Environment, DatasetBundle, check_environments
from .synthetic import SpuriousSpec, generate_spurious_environments, LABEL_SAMPLING_MODES
from .csv_io import load_csv, write_csv, save_bundle, load_bundle, infer_feature_dim
from .batching import EnvBatch, BatchGroup, stratified_batches, steps_per_epoch, epoch_seed

__all__ = [
    'Example', 'Environment', 'DatasetBundle', 'check_environments',
    'SpuriousSpec', 'generate_spurious_environments', 'LABEL_SAMPLING_MODES',
    'load_csv', 'write_csv', 'save_bundle', 'load_bundle', 'infer_feature_dim',
    'EnvBatch', 'BatchGroup', 'stratified_batches', 'steps_per_epoch', 'epoch_seed',
]

"""
Training objectives: the VREx penalty over per-environment risks and Mixup.
"""

from .vrex import (
    VRExConfig, RiskVector, per_environment_risks, vrex_objective, lambda_at_epoch,
    one_hot, risk_statistics,
)
from .mixup import MixupConfig, MixedBatch, mixup_pair, sample_mixup_batch, mixed_loss, PAIRING_MODES

__all__ = [
    'VRExConfig', 'RiskVector', 'per_environment_risks', 'vrex_objective', 'lambda_at_epoch',
    'one_hot', 'risk_statistics',
    'MixupConfig', 'MixedBatch', 'mixup_pair', 'sample_mixup_batch', 'mixed_loss', 'PAIRING_MODES',
]

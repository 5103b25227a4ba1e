"""
MLP classifier: configuration, parameters, forward pass and prediction.
"""

from .mlp import (
    ModelConfig, ModelParams, BoundParams, init_params, bind_params,
    forward, predict, parameter_count, INIT_SCHEMES,
)

__all__ = [
    'ModelConfig', 'ModelParams', 'BoundParams', 'init_params', 'bind_params',
    'forward', 'predict', 'parameter_count', 'INIT_SCHEMES',
]

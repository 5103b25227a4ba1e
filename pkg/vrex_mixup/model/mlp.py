"""
Feed-forward MLP classifier over tabular features.
"""

from dataclasses import dataclass, field, asdict
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from config import ConfigValidationResult, ConfigValidator
from ..engine import ops
from ..engine.tape import Tape, TracedValue, Tensor, as_tensor
from ..errors import ConfigError, ShapeError

INIT_SCHEMES = ["he", "xavier"]


@dataclass
class ModelConfig:
    """Architecture and initialization of the classifier."""
    input_dim: int = 6
    hidden_dims: List[int] = field(default_factory=lambda: [32, 32])
    num_classes: int = 2
    init_scheme: str = "he"
    seed: int = 0

    def validate(self) -> ConfigValidationResult:
        result = ConfigValidationResult()
        validator = ConfigValidator()
        error = validator.validate_positive(self.input_dim, "input_dim")
        if error:
            result.add_issue(error)
        if self.num_classes < 2:
            result.add_issue(f"num_classes must be >= 2, got {self.num_classes}")
        for position, width in enumerate(self.hidden_dims):
            if int(width) < 1:
                result.add_issue(f"hidden_dims[{position}] must be positive, got {width}")
        error = validator.validate_choice(self.init_scheme, INIT_SCHEMES, "init_scheme")
        if error:
            result.add_issue(error)
        if not 0 <= int(self.seed) < 2 ** 64:
            result.add_issue(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        return result

    def layer_dims(self) -> List[Tuple[int, int]]:
        widths = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(widths[:-1], widths[1:]))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass
class ModelParams:
    """Ordered (weight [in x out], bias [out]) pairs."""
    layers: List[Tuple[Tensor, Tensor]]

    def __post_init__(self):
        for k, (weight, bias) in enumerate(self.layers):
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise ShapeError(
                    f"layer {k} weight {weight.shape} and bias {bias.shape} do not match",
                    weight.shape, bias.shape,
                )
            if k and self.layers[k - 1][0].shape[1] != weight.shape[0]:
                raise ShapeError(
                    f"layer {k} input {weight.shape[0]} does not chain with previous output "
                    f"{self.layers[k - 1][0].shape[1]}",
                    self.layers[k - 1][0].shape, weight.shape,
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0][0].shape[0]

    @property
    def num_classes(self) -> int:
        return self.layers[-1][0].shape[1]

    def named_tensors(self) -> Dict[str, Tensor]:
        """Parameters keyed ``layers.{k}.weight`` / ``layers.{k}.bias`` in layer order."""
        named = {}
        for k, (weight, bias) in enumerate(self.layers):
            named[f"layers.{k}.weight"] = weight
            named[f"layers.{k}.bias"] = bias
        return named

    @classmethod
    def from_named(cls, named: Dict[str, Tensor]) -> "ModelParams":
        layers = []
        k = 0
        while f"layers.{k}.weight" in named:
            layers.append((as_tensor(named[f"layers.{k}.weight"]), as_tensor(named[f"layers.{k}.bias"])))
            k += 1
        return cls(layers)

    def copy(self) -> "ModelParams":
        return ModelParams([(w.copy(), b.copy()) for w, b in self.layers])


@dataclass
class BoundParams:
    """Model parameters registered on a tape."""
    layers: List[Tuple[TracedValue, TracedValue]]

    def leaves(self) -> List[TracedValue]:
        return [t for pair in self.layers for t in pair]

    def gradients(self, grads: Dict[int, np.ndarray]) -> Dict[str, np.ndarray]:
        """Pick this model's gradients out of a backward result, keyed like ``named_tensors``."""
        named = {}
        for k, (weight, bias) in enumerate(self.layers):
            named[f"layers.{k}.weight"] = grads.get(weight.node_id, np.zeros_like(weight.value))
            named[f"layers.{k}.bias"] = grads.get(bias.node_id, np.zeros_like(bias.value))
        return named


def init_params(config: ModelConfig) -> ModelParams:
    """
    Draw initial weights from the configured scheme; biases start at zero.

    he: normal with std sqrt(2 / in); xavier: uniform on +-sqrt(6 / (in + out)).
    """
    result = config.validate()
    if not result.valid:
        raise ConfigError("invalid model config", result.issues)
    rng = np.random.default_rng(int(config.seed))
    layers = []
    for fan_in, fan_out in config.layer_dims():
        if config.init_scheme == "he":
            weight = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        else:
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weight = rng.uniform(-limit, limit, size=(fan_in, fan_out))
        layers.append((weight, np.zeros(fan_out)))
    return ModelParams(layers)


def bind_params(params: ModelParams, tape: Tape, requires_grad: bool = True) -> BoundParams:
    """Register every parameter tensor as a leaf of ``tape``."""
    return BoundParams([
        (tape.leaf(weight, requires_grad), tape.leaf(bias, requires_grad))
        for weight, bias in params.layers
    ])


def forward(params: Union[ModelParams, BoundParams], batch,
            tape: Optional[Tape] = None) -> TracedValue:
    """
    Compute logits: affine -> relu through the hidden layers, final affine.

    Args:
        params: Plain parameters (bound as constants on ``tape``) or bound parameters
        batch: [B x input_dim] features
        tape: Tape to record on; defaults to the bound parameters' tape or a new one

    Returns:
        Traced [B x num_classes] logits
    """
    if isinstance(params, ModelParams):
        tape = tape if tape is not None else Tape()
        bound = bind_params(params, tape, requires_grad=False)
    else:
        bound = params
        tape = bound.layers[0][0].tape
    batch = as_tensor(batch)
    input_dim = bound.layers[0][0].shape[0]
    if batch.ndim != 2 or batch.shape[1] != input_dim:
        raise ShapeError(
            f"batch shape {batch.shape} does not match input_dim {input_dim}",
            batch.shape, (input_dim,),
        )

    hidden = tape.constant(batch)
    last = len(bound.layers) - 1
    for k, (weight, bias) in enumerate(bound.layers):
        hidden = ops.add_bias(ops.matmul(hidden, weight), bias)
        if k < last:
            hidden = ops.relu(hidden)
    return hidden


def predict(params: ModelParams, batch) -> np.ndarray:
    """Argmax class per row; ties go to the lower class index."""
    return np.argmax(forward(params, batch).value, axis=1)


def parameter_count(params: ModelParams) -> int:
    return int(sum(w.size + b.size for w, b in params.layers))


__all__ = [
    'ModelConfig', 'ModelParams', 'BoundParams', 'init_params', 'bind_params',
    'forward', 'predict', 'parameter_count', 'INIT_SCHEMES',
]

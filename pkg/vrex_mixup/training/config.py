"""
Training configuration: the nested experiment config, its flat dotted-key view
and the method presets compared by the benchmark.
"""

from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

from config import ConfigValidationResult, ConfigValidator
from ..errors import ConfigError
from ..metrics.classification import WEIGHTING_MODES
from ..model.mlp import ModelConfig
from ..objectives.mixup import MixupConfig
from ..objectives.vrex import VRExConfig

OPTIMIZERS = ["adam", "sgd"]
METHODS = ["erm", "vrex", "mixup", "vrex_mixup"]
SECTIONS = {"model": ModelConfig, "vrex": VRExConfig, "mixup": MixupConfig}


@dataclass
class TrainConfig:
    """Everything that determines a two-stage run."""
    model: ModelConfig = field(default_factory=ModelConfig)
    vrex: VRExConfig = field(default_factory=VRExConfig)
    mixup: MixupConfig = field(default_factory=MixupConfig)
    stage1_epochs: int = 100
    stage2_epochs: int = 50
    batch_size: int = 64
    optimizer: str = "adam"
    lr_stage1: float = 1e-3
    lr_stage2: float = 1e-4
    adam_betas: Tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    run_seed: int = 0
    checkpoint_every: int = 0
    stage2_keep_vrex: bool = False
    early_stop_patience: int = 0
    log_wall_time: bool = False
    eval_weighting: str = "unweighted"

    def validate(self) -> ConfigValidationResult:
        """Check every field and every nested section."""
        result = ConfigValidationResult()
        validator = ConfigValidator()
        for name in ("stage1_epochs", "stage2_epochs", "checkpoint_every", "early_stop_patience"):
            if getattr(self, name) < 0:
                result.add_issue(f"{name} must be >= 0, got {getattr(self, name)}")
        error = validator.validate_positive(self.batch_size, "batch_size")
        if error:
            result.add_issue(error)
        for name in ("lr_stage1", "lr_stage2", "adam_eps"):
            error = validator.validate_positive(getattr(self, name), name)
            if error:
                result.add_issue(error)
        if len(self.adam_betas) != 2 or not all(0.0 <= b < 1.0 for b in self.adam_betas):
            result.add_issue(f"adam_betas must be two values in [0, 1), got {list(self.adam_betas)}")
        error = validator.validate_choice(self.optimizer, OPTIMIZERS, "optimizer")
        if error:
            result.add_issue(error)
        error = validator.validate_choice(self.eval_weighting, WEIGHTING_MODES, "eval_weighting")
        if error:
            result.add_issue(error)
        if not 0 <= int(self.run_seed) < 2 ** 64:
            result.add_issue(f"run_seed must be an unsigned 64-bit integer, got {self.run_seed}")
        for section in SECTIONS:
            result.merge(getattr(self, section).validate(), prefix=f"{section}.")
        return result

    def check(self) -> "TrainConfig":
        """Raise ConfigError listing every issue; return self when valid."""
        result = self.validate()
        if not result.valid:
            raise ConfigError("invalid training config", result.issues)
        return self

    def to_dict(self) -> Dict[str, Any]:
        values = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in SECTIONS:
                values[f.name] = value.to_dict()
            elif isinstance(value, tuple):
                values[f.name] = list(value)
            else:
                values[f.name] = value
        return values

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "TrainConfig":
        return from_flat(flatten_dict(values))

    def flatten(self) -> Dict[str, Any]:
        """Dotted-key view, e.g. ``vrex.lambda_max``."""
        return flatten_dict(self.to_dict())


def field_values(config: TrainConfig) -> Dict[str, Any]:
    """Dotted-key view of the typed field values; tuples stay tuples."""
    values = {}
    for f in fields(config):
        value = getattr(config, f.name)
        if f.name in SECTIONS:
            for sub in fields(value):
                values[f"{f.name}.{sub.name}"] = getattr(value, sub.name)
        else:
            values[f.name] = value
    return values


def flatten_dict(values: Dict[str, Any]) -> Dict[str, Any]:
    flat = {}
    for key, value in values.items():
        if key in SECTIONS and isinstance(value, dict):
            for sub_key, sub_value in value.items():
                flat[f"{key}.{sub_key}"] = sub_value
        else:
            flat[key] = value
    return flat


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {raw!r}")


def coerce_value(key: str, raw: Any, current: Any) -> Any:
    """
    Convert ``raw`` to the type of the field's current value.

    Strings from config files and ``--set`` flags are parsed; already typed
    values are converted the same way.

    Raises:
        ConfigError: If the value cannot be converted
    """
    try:
        if isinstance(current, bool):
            return raw if isinstance(raw, bool) else _parse_bool(str(raw), key)
        if isinstance(current, int):
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError(raw)
            return int(str(raw).strip()) if isinstance(raw, str) else int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, (list, tuple)):
            items = [s for s in raw.split(",") if s.strip()] if isinstance(raw, str) else list(raw)
            element = current[0] if len(current) else 0.0
            converted = [coerce_value(key, item, element) for item in items]
            return tuple(converted) if isinstance(current, tuple) else converted
        return raw.strip() if isinstance(raw, str) else raw
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot convert {raw!r} to {type(current).__name__}")


def from_flat(flat: Dict[str, Any], base: Optional[TrainConfig] = None) -> TrainConfig:
    """
    Build a config from dotted keys layered over ``base`` (defaults when None).

    Raises:
        ConfigError: On unknown keys or unconvertible values
    """
    base = base if base is not None else TrainConfig()
    current = field_values(base)
    unknown = sorted(set(flat) - set(current))
    if unknown:
        raise ConfigError("unknown configuration keys", [f"unknown key {k!r}" for k in unknown])

    sections = {name: {} for name in SECTIONS}
    top = {}
    for key, raw in flat.items():
        value = coerce_value(key, raw, current[key])
        if "." in key:
            section, name = key.split(".", 1)
            sections[section][name] = value
        else:
            top[key] = value
    for name in SECTIONS:
        top[name] = replace(getattr(base, name), **sections[name])
    return replace(base, **top)


def apply_method(config: TrainConfig, method: str) -> TrainConfig:
    """
    Specialize a config to one of the compared methods.

    erm: no penalty, no Stage 2; vrex: Stage 1 only; mixup: no penalty, then
    Stage 2; vrex_mixup: both stages as configured.
    """
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}", [f"method must be one of {METHODS}"])
    if method in ("erm", "mixup"):
        config = replace(config, vrex=replace(config.vrex, lambda_max=0.0))
    if method in ("erm", "vrex"):
        config = replace(config, stage2_epochs=0)
    return config


def seeded(config: TrainConfig, seed: int) -> TrainConfig:
    """Use ``seed`` for initialization, batching and mixup sampling."""
    return replace(
        config,
        run_seed=int(seed),
        model=replace(config.model, seed=int(seed)),
        mixup=replace(config.mixup, seed=int(seed)),
    )


__all__ = ['TrainConfig', 'OPTIMIZERS', 'METHODS', 'field_values', 'flatten_dict', 'coerce_value', 'from_flat',
           'apply_method', 'seeded']

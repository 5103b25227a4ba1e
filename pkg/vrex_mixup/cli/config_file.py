"""
Flat ``key = value`` configuration files and ``--set key=value`` overrides.
"""

from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from ..errors import ConfigError
from ..training.config import coerce_value

PathLike = Union[str, Path]


def parse_config_text(text: str, known_keys: Iterable[str], source: str = "<config>") -> Dict[str, str]:
    """
    Parse ``key = value`` lines; ``#`` starts a comment and blank lines are skipped.

    Values are returned as raw strings; later lines override earlier ones.

    Raises:
        ConfigError: On a line without ``=`` or a key not in ``known_keys``
    """
    known = set(known_keys)
    values = {}
    for line_number, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(f"{source}: line {line_number}: expected 'key = value', got {content!r}")
        key, raw = (part.strip() for part in content.split("=", 1))
        if key not in known:
            raise ConfigError(f"{source}: line {line_number}: unknown key {key!r}")
        values[key] = raw
    return values


def read_config_file(path: PathLike, known_keys: Iterable[str]) -> Dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror or exc}") from exc
    except UnicodeDecodeError as exc:
        raise ConfigError(f"config file {path} is not UTF-8 text ({exc.reason})") from None
    return parse_config_text(text, known_keys, str(path))


def parse_overrides(items: Optional[List[str]], known_keys: Iterable[str]) -> Dict[str, str]:
    """Parse repeated ``--set key=value`` arguments."""
    known = set(known_keys)
    values = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        if key not in known:
            raise ConfigError(f"--set: unknown key {key!r}")
        values[key] = raw
    return values


def apply_flat(obj: Any, flat: Dict[str, Any]):
    """Return a copy of a flat dataclass with converted values for ``flat``'s keys."""
    current = asdict(obj)
    unknown = sorted(set(flat) - set(current))
    if unknown:
        raise ConfigError("unknown configuration keys", [f"unknown key {k!r}" for k in unknown])
    return replace(obj, **{k: coerce_value(k, v, current[k]) for k, v in flat.items()})


__all__ = ['parse_config_text', 'read_config_file', 'parse_overrides', 'apply_flat']

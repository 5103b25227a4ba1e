"""
Configuration module for the VREx + Mixup training engine.
Contains runtime settings read from the environment and the shared validation helpers
used by the experiment configuration dataclasses.
"""

import os
from typing import List, Dict, Any, Optional
from dataclasses import dataclass, field
from pathlib import Path
import logging

# Try to import python-dotenv for .env file support
try:
    from dotenv import load_dotenv
    _DOTENV_AVAILABLE = True
except ImportError:
    _DOTENV_AVAILABLE = False

logger = logging.getLogger(__name__)

TOOL_VERSION = "1.0.0"


@dataclass
class ConfigValidationResult:
    """Issues and warnings collected while checking one config section."""
    valid: bool = True
    issues: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def add_issue(self, issue: str) -> None:
        """Record a blocking problem."""
        self.issues.append(issue)
        self.valid = False

    def add_warning(self, warning: str) -> None:
        """Record a non-blocking note."""
        self.warnings.append(warning)

    def merge(self, other: "ConfigValidationResult", prefix: str = "") -> None:
        """Fold another result into this one, prefixing its messages."""
        for issue in other.issues:
            self.add_issue(f"{prefix}{issue}")
        for warning in other.warnings:
            self.add_warning(f"{prefix}{warning}")


class EnvironmentConfig:
    """Typed access to runtime settings from the process environment."""

    @staticmethod
    def load_env_file(env_path: str = ".env") -> bool:
        """Read a .env file into the environment when python-dotenv is installed."""
        if not _DOTENV_AVAILABLE:
            logger.debug("python-dotenv not available, using system environment variables only")
            return False

        env_file = Path(env_path)
        if env_file.exists():
            load_dotenv(env_file)
            logger.debug(f"Loaded environment variables from {env_path}")
            return True
        return False

    @staticmethod
    def get_env_int(key: str, default: int) -> int:
        """Integer setting; falls back to the default when unset or malformed."""
        try:
            return int(os.getenv(key, default))
        except (ValueError, TypeError):
            return default


class ConfigValidator:
    """Field checks shared by the model, objective and training configs."""

    @staticmethod
    def validate_probability(value: Any, name: str) -> Optional[str]:
        """Validate that a value is a probability in [0, 1]."""
        try:
            num_val = float(value)
        except (ValueError, TypeError):
            return f"{name} must be a number, got {type(value).__name__}"
        if not 0.0 <= num_val <= 1.0:
            return f"{name} must be within [0, 1], got {num_val}"
        return None

    @staticmethod
    def validate_positive(value: Any, name: str, allow_zero: bool = False) -> Optional[str]:
        """Validate that a numeric value is positive (or nonnegative)."""
        try:
            num_val = float(value)
        except (ValueError, TypeError):
            return f"{name} must be a number, got {type(value).__name__}"
        if allow_zero and num_val < 0:
            return f"{name} must be >= 0, got {value}"
        if not allow_zero and num_val <= 0:
            return f"{name} must be > 0, got {value}"
        return None

    @staticmethod
    def validate_choice(value: Any, choices: List[str], name: str) -> Optional[str]:
        """Validate that a value is one of the allowed choices."""
        if value not in choices:
            return f"{name} must be one of {', '.join(choices)}, got {value!r}"
        return None


# Runtime settings are read once at import.
env_config = EnvironmentConfig()
env_config.load_env_file()


def get_logging_config() -> Dict[str, Any]:
    """Settings for utilities.logger and utilities.structured_logger."""
    return {
        "level": os.getenv("LOG_LEVEL", "INFO"),
        "format": os.getenv("LOG_FORMAT", "json"),
        "file_path": os.getenv("LOG_FILE_PATH"),
        "max_file_size": env_config.get_env_int("LOG_MAX_FILE_SIZE", 10485760),  # 10MB
        "backup_count": env_config.get_env_int("LOG_BACKUP_COUNT", 5),
    }


def get_runtime_config() -> Dict[str, Any]:
    """Get runtime settings for the command-line tools."""
    return {
        "version": TOOL_VERSION,
        "default_jobs": env_config.get_env_int("VREX_MIXUP_DEFAULT_JOBS", 1),
    }

"""
Logger utilities shared by the library and the command-line tools.
"""
import logging
import sys
from typing import Optional

from config import get_logging_config

# Optional multi-process safe file handler for parallel sweeps
try:
    from concurrent_log_handler import ConcurrentRotatingFileHandler
    _CONCURRENT_HANDLER_AVAILABLE = True
except ImportError:
    _CONCURRENT_HANDLER_AVAILABLE = False

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _build_handlers() -> list:
    settings = get_logging_config()
    # stdout carries command results only
    handlers = [logging.StreamHandler(sys.stderr)]
    if settings["file_path"] and _CONCURRENT_HANDLER_AVAILABLE:
        handlers.append(ConcurrentRotatingFileHandler(
            settings["file_path"],
            maxBytes=settings["max_file_size"],
            backupCount=settings["backup_count"],
        ))
    return handlers


def get_logger(name: Optional[str] = None, fmt: str = LOG_FORMAT) -> logging.Logger:
    """
    Get a configured logger instance.

    Args:
        name: Logger name (defaults to the package logger)
        fmt: Format string applied to newly attached handlers

    Returns:
        Configured logger instance
    """
    if name is None:
        name = "vrex_mixup"

    logger = logging.getLogger(name)

    # Configure basic logging if not already configured
    if not logger.handlers:
        formatter = logging.Formatter(fmt)
        for handler in _build_handlers():
            handler.setFormatter(formatter)
            logger.addHandler(handler)
        logger.setLevel(get_logging_config()["level"].upper())
        logger.propagate = False

    return logger


def set_log_level(level: str) -> None:
    """Change the level of every logger created through this module."""
    for name in list(logging.root.manager.loggerDict):
        candidate = logging.getLogger(name)
        if candidate.handlers and not candidate.propagate:
            candidate.setLevel(level.upper())


__all__ = ['get_logger', 'set_log_level']

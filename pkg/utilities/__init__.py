"""
Logging utilities shared by the library, the CLI and the scripts.
"""
from .logger import get_logger, set_log_level
from .structured_logger import get_structured_logger

__all__ = ['get_logger', 'set_log_level', 'get_structured_logger']

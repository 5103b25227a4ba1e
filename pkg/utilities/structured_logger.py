"""
Structured logging for training runs and command-line operations.
Events are rendered as JSON (or console key-value pairs) through structlog.
"""
import time
import uuid
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Optional

import structlog

from config import get_logging_config
from .logger import get_logger

_CONFIGURED = False


def configure_structlog(force: bool = False) -> None:
    """Configure structlog once per process."""
    global _CONFIGURED
    if _CONFIGURED and not force:
        return

    renderer = (
        structlog.dev.ConsoleRenderer(colors=False)
        if get_logging_config()["format"] == "console"
        else structlog.processors.JSONRenderer(sort_keys=True)
    )
    structlog.configure(
        processors=[
            structlog.stdlib.filter_by_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.add_log_level,
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.StackInfoRenderer(),
            structlog.processors.format_exc_info,
            renderer,
        ],
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _CONFIGURED = True


class StructuredLogger:
    """Logger that emits structured events tagged with a component name."""

    def __init__(self, component_name: str):
        configure_structlog()
        self.component_name = component_name
        # Plain message format; structlog renders the whole record
        get_logger(f"vrex_mixup.{component_name}", fmt='%(message)s')
        self._logger = structlog.get_logger(f"vrex_mixup.{component_name}").bind(
            component=component_name
        )

    def bind(self, **fields: Any) -> "StructuredLogger":
        """Return a logger carrying extra context fields on every event."""
        child = StructuredLogger.__new__(StructuredLogger)
        child.component_name = self.component_name
        child._logger = self._logger.bind(**fields)
        return child

    def debug(self, message: str, **kwargs):
        self._logger.debug(message, **kwargs)

    def info(self, message: str, **kwargs):
        self._logger.info(message, **kwargs)

    def warning(self, message: str, **kwargs):
        self._logger.warning(message, **kwargs)

    def error(self, message: str, exception: Optional[BaseException] = None, **kwargs):
        """Log an error, attaching exception type and message when given."""
        if exception is not None:
            kwargs.setdefault("error_type", type(exception).__name__)
            kwargs.setdefault("error_message", str(exception))
        self._logger.error(message, **kwargs)

    def performance(self, operation: str, duration: float, success: bool = True, **metrics):
        """Log the duration of a finished operation."""
        self._logger.info(
            f"Performance: {operation}",
            operation=operation,
            duration_ms=round(duration * 1000, 2),
            success=success,
            **metrics,
        )

    @contextmanager
    def operation_context(self, operation: str, **context_data) -> Iterator[str]:
        """Context manager for tracking operations."""
        start_time = time.time()
        operation_id = str(uuid.uuid4())[:8]

        self.info(
            f"Starting operation: {operation}",
            operation=operation,
            operation_id=operation_id,
            **context_data,
        )
        try:
            yield operation_id
        except Exception as exc:
            duration = time.time() - start_time
            self.error(
                f"Operation failed: {operation}",
                exception=exc,
                operation=operation,
                operation_id=operation_id,
                duration_ms=round(duration * 1000, 2),
            )
            raise
        self.performance(operation, time.time() - start_time, success=True, operation_id=operation_id)


_loggers: Dict[str, StructuredLogger] = {}


def get_structured_logger(component: str) -> StructuredLogger:
    """Get a structured logger instance for a component."""
    if component not in _loggers:
        _loggers[component] = StructuredLogger(component)
    return _loggers[component]


__all__ = ['StructuredLogger', 'get_structured_logger', 'configure_structlog']

"""
Structured logging for reqcsim.

Every component logs through an ``AppLogger`` with keyword fields:

    experiment_logger.info("sweep grid", points=2501, variant='simple')

Console lines go to stderr so CSV written to stdout stays clean; the
optional log file gets one JSON object per record. numpy scalars, complex
numbers and arrays are made JSON-safe before they are written.
"""

from __future__ import annotations

import json
import logging
import sys
import threading
import time
from contextlib import contextmanager
from datetime import datetime, timezone
from functools import wraps
from typing import Any, Callable, Generator

import numpy as np

from config import LOG_FILE, LOG_LEVEL


# =============================================================================
# FIELD CONVERSION
# =============================================================================

def _jsonable(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        # arrays can be large; record the shape only
        return {'shape': list(value.shape), 'dtype': str(value.dtype)}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def _console_value(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f'{float(value):.6g}'
    if isinstance(value, np.ndarray):
        return f'array{value.shape}'
    return str(value)


# =============================================================================
# FORMATTERS
# =============================================================================

class StructuredFormatter(logging.Formatter):
    """One JSON object per record for the log file."""

    def format(self, record: logging.LogRecord) -> str:
        log_data = {
            'timestamp': datetime.now(timezone.utc).isoformat(timespec='milliseconds'),
            'level': record.levelname,
            'component': record.name,
            'thread': record.threadName,
            'message': record.getMessage(),
        }
        fields = getattr(record, 'extra_data', None) or {}
        log_data.update({k: _jsonable(v) for k, v in fields.items()})
        if record.exc_info:
            log_data['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_data, default=str)


class ConsoleFormatter(logging.Formatter):
    """Short human-readable lines; colored only on a terminal."""

    COLORS = {
        'DEBUG': '\033[36m',
        'INFO': '\033[32m',
        'WARNING': '\033[33m',
        'ERROR': '\033[31m',
    }
    RESET = '\033[0m'

    def __init__(self, use_color: bool):
        super().__init__()
        self.use_color = use_color

    def format(self, record: logging.LogRecord) -> str:
        fields = getattr(record, 'extra_data', None) or {}
        extra = ' '.join(f'{k}={_console_value(v)}' for k, v in fields.items())
        level = f'{record.levelname:7}'
        if self.use_color:
            level = f'{self.COLORS.get(record.levelname, "")}{level}{self.RESET}'
        line = f'{datetime.now():%H:%M:%S} {level} {record.name}: {record.getMessage()}'
        return f'{line} [{extra}]' if extra else line


# =============================================================================
# LOGGER
# =============================================================================

class AppLogger:
    """Component logger with keyword-structured fields."""

    def __init__(self, name: str):
        self.logger = logging.getLogger(f'reqcsim.{name}')
        self.logger.setLevel(getattr(logging, LOG_LEVEL, logging.INFO))
        self.logger.handlers.clear()

        console = logging.StreamHandler(sys.stderr)
        console.setFormatter(ConsoleFormatter(use_color=sys.stderr.isatty()))
        self.logger.addHandler(console)

        if LOG_FILE:
            try:
                file_handler = logging.FileHandler(LOG_FILE, encoding='utf-8')
            except OSError:
                file_handler = None
            if file_handler is not None:
                file_handler.setFormatter(StructuredFormatter())
                self.logger.addHandler(file_handler)

        self.logger.propagate = False

    def _log(self, level: int, message: str, **fields: Any) -> None:
        if not self.logger.isEnabledFor(level):
            return
        record = self.logger.makeRecord(self.logger.name, level, '', 0, message, (), None)
        record.extra_data = fields
        self.logger.handle(record)

    def debug(self, message: str, **fields: Any) -> None:
        self._log(logging.DEBUG, message, **fields)

    def info(self, message: str, **fields: Any) -> None:
        self._log(logging.INFO, message, **fields)

    def warning(self, message: str, **fields: Any) -> None:
        self._log(logging.WARNING, message, **fields)

    def error(self, message: str, **fields: Any) -> None:
        self._log(logging.ERROR, message, **fields)


sim_logger = AppLogger('simulation')
experiment_logger = AppLogger('experiments')
cli_logger = AppLogger('cli')


# =============================================================================
# TIMING HELPERS
# =============================================================================

def _elapsed_ms(start: float) -> float:
    return round((time.perf_counter() - start) * 1000, 2)


@contextmanager
def log_stage(logger: AppLogger, stage: str, **context: Any) -> Generator[dict, None, None]:
    """Time one work item (a crystal, an ensemble instance) at debug level.

    Fields the body stores in the yielded dict are logged on completion;
    a failure is logged at error level and re-raised.

        with log_stage(experiment_logger, 'crystal', index=3) as ctx:
            pairs = coupled_pairs(crystal, model)
            ctx['pairs'] = pairs.first.size
    """
    start = time.perf_counter()
    ctx: dict[str, Any] = {}
    worker = threading.current_thread().name
    logger.debug(f'{stage} started', worker=worker, **context)
    try:
        yield ctx
    except Exception as e:
        logger.error(
            f'{stage} failed', duration_ms=_elapsed_ms(start),
            error=str(e), error_type=type(e).__name__, **context,
        )
        raise
    logger.debug(f'{stage} completed', duration_ms=_elapsed_ms(start), **{**context, **ctx})


def log_performance(logger: AppLogger, operation: str) -> Callable[[Callable], Callable]:
    """Log start, completion (with row count for list results) and failure of an experiment."""
    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs):
            start = time.perf_counter()
            logger.info(f'{operation} started')
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                logger.error(
                    f'{operation} failed', duration_ms=_elapsed_ms(start),
                    error=str(e), error_type=type(e).__name__,
                )
                raise
            fields: dict[str, Any] = {'duration_ms': _elapsed_ms(start)}
            if isinstance(result, list):
                fields['rows'] = len(result)
            logger.info(f'{operation} completed', **fields)
            return result

        return wrapper
    return decorator

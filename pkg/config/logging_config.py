"""Logging configuration module with structured file logging and DEBUG toggle.

This module provides:
- Structured file logging with readable format
- Clean console output based on DEBUG flag
- Multiline message support
- The append-only metrics log written into every run directory
"""
import json
import logging
import os
import sys
import threading
import time
from datetime import datetime
from pathlib import Path
from typing import Any

from core.errors import MetricsWriteError

# Configuration constants
LOG_DIR = Path(os.getenv("DREAMER_LOG_DIR", "logs"))
DEBUG_ENV_VAR = "DEBUG"
LOGGER_NAME = "desk-dreamer"
METRICS_FILE = "metrics.jsonl"

# Third-party loggers that are noisy at DEBUG level
_QUIET_LIBRARIES = ["matplotlib", "PIL", "imageio", "asyncio"]


def get_log_file() -> Path:
    """Get the log file path for today.

    Returns:
        Path: Log file path.
    """
    return LOG_DIR / f"dreamer_{datetime.now().strftime('%Y%m%d')}.log"

# Global logger instance
_logger: logging.Logger | None = None
_is_setup: bool = False


def is_debug_mode() -> bool:
    """Check if DEBUG mode is enabled via environment variable.

    Returns:
        bool: True if DEBUG=true, False otherwise.
    """
    return os.getenv(DEBUG_ENV_VAR, "false").lower() == "true"


class MultilineFormatter(logging.Formatter):
    """Formatter that indents continuation lines of multiline messages."""

    def format(self, record: logging.LogRecord) -> str:
        formatted = super().format(record)
        if '\n' in formatted:
            lines = formatted.split('\n')
            formatted = lines[0] + '\n' + '\n'.join('    ' + line for line in lines[1:])
        return formatted


def setup_logging() -> logging.Logger:
    """Set up logging with a structured file handler and DEBUG console output.

    Returns:
        logging.Logger: Configured Python logger instance.
    """
    global _logger, _is_setup

    if _is_setup and _logger is not None:
        return _logger

    LOG_DIR.mkdir(parents=True, exist_ok=True)

    debug_mode = is_debug_mode()
    python_log_level = logging.DEBUG if debug_mode else logging.INFO

    _logger = logging.getLogger(LOGGER_NAME)
    _logger.setLevel(logging.DEBUG)  # Always log everything to handlers
    _logger.propagate = False

    # Remove existing handlers to avoid duplicates
    for handler in _logger.handlers[:]:
        handler.close()
        _logger.removeHandler(handler)

    file_handler = logging.FileHandler(get_log_file(), mode='a', encoding='utf-8')
    file_handler.setLevel(logging.DEBUG)
    log_format = '%(asctime)s | %(levelname)-8s | %(name)s:%(module)s:%(funcName)s:%(lineno)d - %(message)s'
    file_handler.setFormatter(MultilineFormatter(log_format, datefmt='%Y-%m-%d %H:%M:%S'))
    _logger.addHandler(file_handler)

    # In DEBUG mode, add console handler
    if debug_mode:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(python_log_level)
        console_handler.setFormatter(logging.Formatter(
            '%(asctime)s | %(levelname)s | %(module)s:%(funcName)s:%(lineno)d - %(message)s'
        ))
        _logger.addHandler(console_handler)

    _is_setup = True
    return _logger


def get_logger() -> logging.Logger:
    """Get the configured Python logger instance.

    Returns:
        logging.Logger: Python logger instance.
    """
    if _logger is None or not _is_setup:
        return setup_logging()
    return _logger


def suppress_library_console_output() -> None:
    """Keep plotting/imaging libraries off the console when DEBUG=false."""
    if is_debug_mode():
        return
    import warnings
    warnings.filterwarnings('ignore', category=UserWarning)
    for name in _QUIET_LIBRARIES:
        library_logger = logging.getLogger(name)
        library_logger.setLevel(logging.WARNING)
        for handler in library_logger.handlers[:]:
            if isinstance(handler, logging.StreamHandler) and not isinstance(handler, logging.FileHandler):
                library_logger.removeHandler(handler)


def print_clean_message(message: str, prefix: str = "") -> None:
    """Print a clean message to console without debug clutter.

    Also logs the message to file.

    Args:
        message: Message to print.
        prefix: Optional prefix (e.g., emoji indicator).
    """
    text = f"{prefix} {message}" if prefix else message
    print(text, flush=True)
    get_logger().info(text)


class MetricsLog:
    """Append-only line-delimited JSON log shared by the actor and learner streams.

    Every record gets ``kind`` and ``wall_time`` (seconds since the log was
    opened) in addition to the caller's fields.
    """

    def __init__(self, path: str | Path, clock=time.monotonic):
        self.path = Path(path)
        self._clock = clock
        self._start = clock()
        self._lock = threading.Lock()
        self._records = 0
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch(exist_ok=True)
        except OSError as e:
            raise MetricsWriteError(f"cannot open metrics log {self.path}: {e}") from e

    @property
    def records_written(self) -> int:
        return self._records

    def log(self, kind: str, record: dict[str, Any], wall_time: float | None = None) -> dict[str, Any]:
        """Append one record and return it as written.

        Raises:
            MetricsWriteError: If the file cannot be written.
        """
        if wall_time is None:
            wall_time = self._clock() - self._start
        entry = {"kind": kind, "wall_time": round(float(wall_time), 6), **record}
        line = json.dumps(entry, sort_keys=True, default=_json_default)
        with self._lock:
            try:
                with self.path.open("a", encoding="utf-8") as handle:
                    handle.write(line + "\n")
            except OSError as e:
                raise MetricsWriteError(f"cannot write metrics log {self.path}: {e}") from e
            self._records += 1
        return entry


def _json_default(value: Any) -> Any:
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def read_metrics(path: str | Path, kind: str | None = None) -> list[dict[str, Any]]:
    """Parse a metrics log, optionally keeping only one record kind."""
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if kind is None or record.get("kind") == kind:
                records.append(record)
    return records

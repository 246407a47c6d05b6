"""
Logging setup for the MAIL toolkit.

Diagnostics always go to a stream separate from the data the commands
print (standard error by default), either as one JSON object per line or
as short human-readable lines. Records logged while a sample is being
lifted, graphed or classified carry that sample's name (see
sample_context).
"""

from __future__ import annotations

import json
import logging
import os
import sys
from contextlib import contextmanager
from contextvars import ContextVar
from datetime import datetime, timezone
from typing import Any, Iterator, Optional, TextIO

_STANDARD_ATTRS = frozenset({
    "name", "msg", "args", "created", "filename", "funcName",
    "levelname", "levelno", "lineno", "module", "msecs",
    "pathname", "process", "processName", "relativeCreated",
    "stack_info", "exc_info", "exc_text", "thread", "threadName",
    "taskName", "message", "sample",
})

_current_sample: ContextVar[Optional[str]] = ContextVar("mail_sample", default=None)


@contextmanager
def sample_context(name: str) -> Iterator[None]:
    """Attach ``name`` to every record logged inside the block."""
    token = _current_sample.set(name)
    try:
        yield
    finally:
        _current_sample.reset(token)


class SampleContextFilter(logging.Filter):
    """Copies the active sample name onto records as ``record.sample``."""

    def filter(self, record: logging.LogRecord) -> bool:
        sample = _current_sample.get()
        if sample is not None and not hasattr(record, "sample"):
            record.sample = sample
        return True


class JSONFormatter(logging.Formatter):
    """
    One JSON object per record.

    Output format:
    {
        "timestamp": "2026-01-15T10:30:00.000000+00:00",
        "level": "WARNING",
        "logger": "src.detector.store",
        "sample": "dropper",
        "message": "skipping sample dropper: ...",
        "extra": {...}
    }

    "sample" is present only inside sample_context.
    """

    def format(self, record: logging.LogRecord) -> str:
        log_data: dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "level": record.levelname,
            "logger": record.name,
        }
        sample = getattr(record, "sample", None)
        if sample is not None:
            log_data["sample"] = sample
        log_data["message"] = record.getMessage()

        if record.exc_info:
            log_data["exception"] = self.formatException(record.exc_info)

        extra = {
            k: v for k, v in record.__dict__.items()
            if k not in _STANDARD_ATTRS and not k.startswith("_")
        }
        if extra:
            log_data["extra"] = extra

        return json.dumps(log_data, default=str)


class HumanReadableFormatter(logging.Formatter):
    """
    Console formatter.

    Format: [HH:MM:SS] LEVEL    logger (sample) - message
    """

    def format(self, record: logging.LogRecord) -> str:
        timestamp = datetime.now().strftime("%H:%M:%S")
        sample = getattr(record, "sample", None)
        where = f"{record.name} ({sample})" if sample is not None else record.name
        msg = f"[{timestamp}] {record.levelname:8} {where} - {record.getMessage()}"

        if record.exc_info:
            msg += "\n" + self.formatException(record.exc_info)

        return msg


def configure_logging(
    level: Optional[str] = None,
    json_format: Optional[bool] = None,
    stream: Optional[TextIO] = None,
) -> None:
    """
    Configure logging for the toolkit.

    Args:
        level: Log level (DEBUG, INFO, WARNING, ERROR). Defaults to the
               LOG_LEVEL env var, else WARNING.
        json_format: If True, use JSON lines. Defaults to LOG_FORMAT=json.
        stream: Where records go. Defaults to standard error.
    """
    if level is None:
        level = os.environ.get("LOG_LEVEL", "WARNING")
    level = level.upper()

    if json_format is None:
        json_format = os.environ.get("LOG_FORMAT", "").lower() == "json"

    numeric_level = getattr(logging, level, logging.WARNING)

    handler = logging.StreamHandler(stream if stream is not None else sys.stderr)
    handler.setLevel(numeric_level)
    handler.addFilter(SampleContextFilter())
    handler.setFormatter(JSONFormatter() if json_format else HumanReadableFormatter())

    root_logger = logging.getLogger()
    root_logger.setLevel(numeric_level)
    root_logger.handlers.clear()
    root_logger.addHandler(handler)

    logging.getLogger("src").setLevel(numeric_level)

"""Logging configuration and timing utilities."""

import logging
import sys
import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from ..core.constants import LOG_FORMAT


def setup_logging(
    level: str = "INFO",
    log_file: Path | None = None,
    format_string: str = LOG_FORMAT,
) -> None:
    """Configure application logging.

    Progress goes to stderr so that stdout stays free for command output.

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR).
        log_file: Optional file path for log output.
        format_string: Log message format.
    """
    numeric_level = getattr(logging, level.upper(), logging.INFO)

    handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]

    if log_file:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(
        level=numeric_level,
        format=format_string,
        handlers=handlers,
        force=True,  # Override any existing configuration
    )


@contextmanager
def log_timing(label: str, logger: logging.Logger) -> Iterator[dict[str, float]]:
    """Log the wall time of a block and expose it as ``timing["seconds"]``."""
    timing = {"seconds": 0.0}
    started = time.perf_counter()
    try:
        yield timing
    finally:
        timing["seconds"] = time.perf_counter() - started
        logger.info(f"{label} finished in {timing['seconds']:.2f}s")

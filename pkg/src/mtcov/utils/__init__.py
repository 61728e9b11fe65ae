"""Utility functions and helpers."""

from .csv_handler import read_returns_csv
from .logging import log_timing, setup_logging
from .null_dump import cached_null

__all__ = ["cached_null", "log_timing", "read_returns_csv", "setup_logging"]

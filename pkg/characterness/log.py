"""Logging setup.

Log lines go to standard error through a rich handler, formatted as
``[HH:MM:SS] LEVEL message``. Standard output is kept for machine output
(box JSON, summaries, CSV). Library modules only call ``get_logger``; the
command line and the demo script call ``setup_logging`` once.
"""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from typing import Iterator

from rich.console import Console
from rich.logging import RichHandler

__all__ = ["get_logger", "setup_logging", "stage_timer", "StageRecord"]

PACKAGE_LOGGER = "characterness"

_stderr_console = Console(stderr=True)


def get_logger(name: str) -> logging.Logger:
    """Return the package logger for a module, e.g. ``characterness.regions``."""
    if not name.startswith(PACKAGE_LOGGER):
        name = f"{PACKAGE_LOGGER}.{name}"
    return logging.getLogger(name)


def setup_logging(verbosity: int = 0) -> logging.Logger:
    """
    Attach a single rich handler to the package logger.

    Parameters:
    verbosity: 0 -> INFO, >0 -> DEBUG, <0 -> WARNING

    Calling it again only changes the level, handlers are never stacked.
    """
    if verbosity > 0:
        level = logging.DEBUG
    elif verbosity < 0:
        level = logging.WARNING
    else:
        level = logging.INFO

    logger = logging.getLogger(PACKAGE_LOGGER)
    logger.setLevel(level)
    if not any(isinstance(h, RichHandler) for h in logger.handlers):
        handler = RichHandler(
            console=_stderr_console,
            show_path=False,
            log_time_format="[%H:%M:%S]",
            markup=False,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(handler)
    logger.propagate = False
    return logger


class StageRecord:
    """Mutable holder a stage fills with the counts it wants reported."""

    def __init__(self, name: str):
        self.name = name
        self.counts: dict[str, int] = {}
        self.elapsed_ms = 0.0

    def count(self, **counts: int) -> None:
        self.counts.update(counts)

    def summary(self) -> str:
        parts = " ".join(f"{k}={v}" for k, v in self.counts.items())
        return f"{self.name}: {parts} ({self.elapsed_ms:.1f} ms)".replace("  ", " ")


@contextmanager
def stage_timer(name: str, logger: logging.Logger | None = None) -> Iterator[StageRecord]:
    """
    Time one pipeline stage and log exactly one INFO line when it ends.

    Example:
    with stage_timer("candidates") as stage:
        regions = extract_candidates(rgb, params)
        stage.count(regions=len(regions))
    # [12:00:01] INFO candidates: regions=57 (84.2 ms)
    """
    record = StageRecord(name)
    start = time.perf_counter()
    try:
        yield record
    finally:
        record.elapsed_ms = (time.perf_counter() - start) * 1000.0
        (logger or get_logger("pipeline")).info(record.summary())

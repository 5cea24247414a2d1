"""Exception hierarchy shared by every stage.

Each error carries the process exit code the command line reports for it:
1 usage, 2 I/O, 3 data.
"""

from __future__ import annotations

__all__ = [
    "EXIT_OK",
    "EXIT_USAGE",
    "EXIT_IO",
    "EXIT_DATA",
    "CharacternessError",
    "UsageError",
    "ConfigError",
    "InputOutputError",
    "DataError",
    "ImageShapeError",
    "DegenerateRegionError",
    "EmptyGroundTruthError",
    "SubmodularityError",
    "ModelFormatError",
    "ModelVersionError",
    "DatasetError",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_DATA = 3


class CharacternessError(Exception):
    """Base class; ``exit_code`` is what the CLI exits with."""

    exit_code: int = EXIT_DATA


class UsageError(CharacternessError):
    exit_code = EXIT_USAGE


class ConfigError(UsageError):
    """Unknown configuration key or a value that fails validation."""


class InputOutputError(CharacternessError):
    """A file could not be read, decoded or written."""

    exit_code = EXIT_IO


class DataError(CharacternessError):
    exit_code = EXIT_DATA


class ImageShapeError(DataError, ValueError):
    """Arrays with mismatched or unusable dimensions."""


class DegenerateRegionError(DataError):
    """A region on which a cue is undefined (empty skeleton, no edge pixels...).

    The detection pipeline catches this per region and scores the region 0.
    """


class EmptyGroundTruthError(DataError, ValueError):
    pass


class SubmodularityError(DataError, ValueError):
    """A pairwise weight is negative, so min-cut no longer gives the optimum."""


class ModelFormatError(DataError):
    """Malformed or truncated model file. Messages start with ``line N:``."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ModelVersionError(ModelFormatError):
    pass


class DatasetError(DataError):
    """Missing dataset files or a dataset without usable samples."""

"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for usage/config problems, 3 for bad input data, 4 for numeric failures
(missing edges, missing passages, zero variance).
"""

from __future__ import annotations


class MotionBlurError(ValueError):
    """Base class for all toolkit errors."""

    exit_code = 3


class ConfigError(MotionBlurError):
    """Invalid configuration, parameter or usage."""

    exit_code = 2


class DataError(MotionBlurError):
    """Malformed or unusable input data."""

    exit_code = 3


class NumericError(MotionBlurError):
    """A measurement could not be formed from otherwise valid data."""

    exit_code = 4


class InvalidReferenceError(ConfigError):
    pass


class WindowTooLongError(ConfigError):
    pass


class ResolutionError(ConfigError):
    pass


class BoundsError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    def __init__(self, key: str, source: str | None = None):
        self.key = key
        where = f" in {source}" if source else ""
        super().__init__(f"unknown key {key!r}{where}")


class NonUniformGridError(DataError):
    def __init__(self, row: int, message: str = "non-uniform time grid"):
        self.row = row
        super().__init__(f"{message} at row {row}")


class InsufficientDataError(DataError):
    pass


class DeviceSetMismatchError(DataError):
    def __init__(self, difference: set[str]):
        self.difference = frozenset(difference)
        names = ", ".join(sorted(difference))
        super().__init__(f"device sets differ: {names}")


class NoCrossingError(NumericError):
    def __init__(self, level: float, which: str = "level"):
        self.level = level
        super().__init__(f"{which} {level:g} is never crossed")


class NoEdgeError(NumericError):
    pass


class NoPassageError(NumericError):
    pass


class DegenerateRegressionError(NumericError):
    pass


class ZeroVarianceError(NumericError):
    pass

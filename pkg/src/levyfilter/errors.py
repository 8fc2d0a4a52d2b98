"""Exception types shared across the package."""


class LevyFilterError(Exception):
    """Base class for all package errors."""


class DomainError(LevyFilterError):
    """An argument lies outside the mathematical domain of an operation."""


class RangeError(LevyFilterError):
    """A value lies outside the representable range of a table or law."""


class UnsupportedDensityError(LevyFilterError):
    """The requested copula has no absolutely continuous mixed density."""


class UnsupportedConfigError(LevyFilterError):
    """A structurally valid configuration the solver does not handle."""


class DegenerateLawError(LevyFilterError):
    """A conditional jump law with (numerically) vanishing mass."""


class SimulationError(LevyFilterError):
    """Path simulation produced a non-finite state."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class NumericalError(LevyFilterError):
    """A quadrature or transform failed to converge."""


class FilterDegeneracyError(LevyFilterError):
    """Total filter mass underflowed (or all particle weights vanished)."""


class DomainTooSmallError(LevyFilterError):
    """Initial law leaks too much mass outside the periodic solver domain."""

    def __init__(self, message: str, suggested_half_width: float):
        super().__init__(message)
        self.suggested_half_width = suggested_half_width


class ConfigError(LevyFilterError):
    """Configuration text failed to parse or validate.

    Carries the offending key and 1-based line number when known.
    """

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"key '{key}': "
        super().__init__(prefix + message)
        self.key = key
        self.line = line

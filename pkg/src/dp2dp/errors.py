"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class Dp2dpError(Exception):
    """Base class for all package errors."""


class ConfigError(Dp2dpError):
    """Invalid parameter or configuration value."""


class DataError(Dp2dpError):
    """Malformed or unusable input data (parse failures, empty groups)."""


class NumericError(Dp2dpError):
    """Numerical failure (non-finite values, quadrature non-convergence)."""


class CalibrationError(ConfigError):
    """Noise calibration cannot reach the requested privacy target."""

"""Exception hierarchy, mapped onto CLI exit codes."""


class CtxdScdvError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(CtxdScdvError):
    """Invalid or inconsistent configuration (exit code 2)."""

    exit_code = 2


class DataError(CtxdScdvError):
    """Malformed, misaligned, or missing input data (exit code 3)."""

    exit_code = 3


class NumericError(CtxdScdvError):
    """Numerical failure (singular covariance, undefined statistic; exit code 4)."""

    exit_code = 4

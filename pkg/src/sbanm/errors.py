"""Typed exceptions shared across the package."""


class SBANMError(Exception):
    """Base class for errors raised by this package."""


class DataError(SBANMError):
    """Malformed input data or files (CLI exit code 2)."""


class NumericalError(SBANMError):
    """Numerical failure during estimation (CLI exit code 3)."""

"""Exception types shared across the package."""


class ResourceLimitError(RuntimeError):
    """Raised when an operation would exceed a configured size or retry budget."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine fails or an internal guarantee is violated."""


class ParseError(ValueError):
    """Raised when an input file cannot be decoded as Boolean tabular data."""

"""Exception types raised across the package.

Everything a caller can fix by changing inputs derives from ``ValueError``;
numerical breakdowns during training derive from ``ArithmeticError``.
"""


class DimensionError(ValueError):
    """Array shapes or class counts do not agree."""


class MetricValidationError(ValueError):
    """A matrix violates the label-space metric invariants."""


class DataParseError(ValueError):
    """Malformed CSV input. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class StratificationError(ValueError):
    """A class has too few examples to appear on both sides of a split."""


class ConfigError(ValueError):
    """Experiment configuration is invalid."""


class MetricNotReadyError(RuntimeError):
    """No confusion statistics have been folded into the EMA yet."""


class NonFiniteError(ArithmeticError):
    """A loss, gradient or parameter became NaN or infinite."""

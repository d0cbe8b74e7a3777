"""
Exception types raised by streamqoe.

Every error carries the CLI exit code it maps to: 2 for rejected input, 3 for
numeric failures.
"""

from .schema import EXIT_FAILURE, EXIT_INPUT, EXIT_NUMERIC


class StreamQoEError(Exception):
    """Base class for all streamqoe errors."""
    exit_code = EXIT_FAILURE


# --- Input validation (exit code 2) ---

class InputError(StreamQoEError, ValueError):
    exit_code = EXIT_INPUT


class SessionParseError(InputError):
    """A session document is malformed; `field` names the offending key."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class SessionValidationError(InputError):
    """A session parsed but violates a domain invariant."""


class FeatureError(InputError):
    """Feature extraction or encoding received inconsistent input."""


class MissingFeatureError(InputError):
    """A model references a feature the input does not provide."""

    def __init__(self, feature, model_name=None):
        where = f" required by model '{model_name}'" if model_name else ""
        super().__init__(f"missing feature '{feature}'{where}")
        self.feature = feature


class SplitError(InputError):
    pass


class ModelFormatError(InputError):
    pass


class ConfigError(InputError):
    pass


class StatsInputError(InputError):
    pass


# --- Numeric failures (exit code 3) ---

class CurveDomainError(StreamQoEError, ValueError):
    exit_code = EXIT_NUMERIC


class SingularMatrixError(StreamQoEError, ArithmeticError):
    """The design matrix is rank deficient; `columns` lists dependent ones."""
    exit_code = EXIT_NUMERIC

    def __init__(self, columns):
        names = ", ".join(columns) if columns else "<unknown>"
        super().__init__(f"design matrix is singular; dependent columns: {names}")
        self.columns = list(columns)

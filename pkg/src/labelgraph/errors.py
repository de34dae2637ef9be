"""Exception types shared across the package.

The CLI maps these onto exit codes: config/usage problems exit 1, data
problems exit 2, numerical failures exit 3.
"""


class LabelGraphError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(LabelGraphError):
    """Bad configuration: unknown key, wrong type, inconsistent settings."""


class DataFormatError(LabelGraphError):
    """Malformed input data (dataset, label names, or embedding files).

    Carries an optional 1-based line number so parse errors point at the
    offending line.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(LabelGraphError):
    """In-memory inputs violate a documented precondition."""


class NumericalError(LabelGraphError):
    """Non-finite values or a failed numerical check during training."""

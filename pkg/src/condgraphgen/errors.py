"""Exception types shared across the package."""


class DataError(Exception):
    """Base for dataset/file-level problems (CLI exit code 3)."""


class IngestionError(DataError):
    """A mandatory dataset file is missing or unreadable."""


class TuFormatError(DataError):
    """Malformed TU-format content; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class CapacityError(DataError):
    """A graph exceeds the configured maximum node count N."""


class DependencyError(DataError):
    """A required upstream artifact (e.g. classifier checkpoint) is missing."""


class ConfigError(ValueError):
    """Invalid or unknown configuration keys/values."""


class NumericError(RuntimeError):
    """Non-finite value encountered during training; names the loss term."""

"""Exception hierarchy. Each class carries the exit code the CLI reports."""

from typing import Optional


class EntrapmentError(Exception):
    exit_code = 2


class UsageError(EntrapmentError):
    exit_code = 1


class ValidationError(EntrapmentError):
    """Bad data or bad parameters (exit code 2)."""
    exit_code = 2


class ConfigError(ValidationError):
    pass


class TelemetryParseError(ValidationError):
    def __init__(self, message: str, line_no: Optional[int] = None, key: Optional[str] = None):
        self.line_no = line_no
        self.key = key
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(f"{prefix}{message}")


class TimestampError(ValidationError):
    def __init__(self, message: str, line_no: int, previous_line_no: int):
        self.line_no = line_no
        self.previous_line_no = previous_line_no
        super().__init__(message)


class StepError(ValidationError):
    pass


class FittingError(EntrapmentError):
    """A model class could not be fitted (empty or degenerate data)."""
    exit_code = 3

    def __init__(self, message: str, model_class: Optional[str] = None):
        self.model_class = model_class
        prefix = f"{model_class}: " if model_class else ""
        super().__init__(f"{prefix}{message}")

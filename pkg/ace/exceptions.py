"""Error hierarchy for the lab.

Every error carries the exit code the management commands hand back to the shell.
"""

from django.core.exceptions import ImproperlyConfigured


class LabError(Exception):
    exit_code = 1


class ConfigurationError(LabError, ImproperlyConfigured):
    exit_code = 2


class DimensionError(LabError, ValueError):
    exit_code = 2


class DomainError(LabError, ValueError):
    exit_code = 2


class UndefinedRiskError(DomainError):
    """Selective risk requested at a threshold that covers nothing."""


class NumericError(LabError, ArithmeticError):
    exit_code = 3


class TrainingError(NumericError):
    def __init__(self, message, epoch):
        super().__init__(f"{message} (epoch {epoch})")
        self.epoch = epoch


class StageError(LabError):
    """A harness stage failed; wraps the original error and keeps its exit code."""

    def __init__(self, stage, cause, sample_index=None):
        where = f" at sample {sample_index}" if sample_index is not None else ""
        super().__init__(f"[{stage}]{where} {cause}")
        self.stage = stage
        self.cause = cause
        self.sample_index = sample_index
        self.exit_code = getattr(cause, "exit_code", LabError.exit_code)


class AcceptanceError(LabError):
    exit_code = 4

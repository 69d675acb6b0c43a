"""Exception hierarchy shared by every module."""


class CascadeScreenError(Exception):
    """Base class for all package errors."""


class InvalidInputError(CascadeScreenError, ValueError):
    """Raised when questionnaire answers or records are out of contract.

    Attributes:
        violations: list of :class:`~cascade_screen.questionnaire.Violation`
            describing what was wrong (may be empty for simple cases).
    """

    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = list(violations or [])


class SchemaError(CascadeScreenError, ValueError):
    """Malformed CSV header, config document or feature schema."""


class RowError(CascadeScreenError, ValueError):
    """A single CSV data row failed to parse or validate."""

    def __init__(self, line, column, message):
        super().__init__(f"line {line}, column {column!r}: {message}")
        self.line = line
        self.column = column


class EmptyDatasetError(CascadeScreenError, ValueError):
    pass


class InsufficientClassError(CascadeScreenError, ValueError):
    pass


class SpecValidationError(CascadeScreenError, ValueError):
    """A learner or cascade specification lies outside its domain."""


class UndefinedSkewError(CascadeScreenError, ValueError):
    pass


class TrainingError(CascadeScreenError, RuntimeError):
    """Training failed. ``fold``/``stage``/``epoch`` locate the failure when known."""

    def __init__(self, message, fold=None, stage=None, epoch=None):
        parts = []
        if stage is not None:
            parts.append(f"stage {stage}")
        if fold is not None:
            parts.append(f"fold {fold}")
        if epoch is not None:
            parts.append(f"epoch {epoch}")
        prefix = f"[{', '.join(parts)}] " if parts else ""
        super().__init__(prefix + message)
        self.fold = fold
        self.stage = stage
        self.epoch = epoch


class GridSearchError(CascadeScreenError, RuntimeError):
    """Every grid point failed."""

    def __init__(self, message, failures):
        super().__init__(message)
        self.failures = failures

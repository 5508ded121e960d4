"""Exception types shared across the package."""


class StanceKGError(Exception):
    """Base class for all package errors."""


class InvalidStanceError(StanceKGError):
    """A stance value outside {Accept, Reject} was used where attitude consistency requires one."""


class DuplicateNodeError(StanceKGError):
    """A tweet id appears more than once in a stance graph."""


class ShapeError(StanceKGError):
    """Embedding or weight dimensions are inconsistent."""


class MissingParameterError(StanceKGError):
    """A scoring model was invoked without its required extra parameters."""


class UndefinedConsistencyError(StanceKGError):
    """Consistency scores are undefined (empty stance graph for the target)."""


class DataError(StanceKGError):
    """Input data is malformed or referentially broken."""


class AlignmentError(DataError):
    """Gold and predicted label sets do not cover the same (tweet, target) keys."""

    def __init__(self, missing_in_pred, missing_in_gold):
        self.missing_in_pred = sorted(missing_in_pred)
        self.missing_in_gold = sorted(missing_in_gold)
        parts = []
        if self.missing_in_pred:
            parts.append(f"missing from predictions: {self.missing_in_pred[:10]}")
        if self.missing_in_gold:
            parts.append(f"missing from gold: {self.missing_in_gold[:10]}")
        super().__init__("; ".join(parts) or "key sets differ")


class ConfigError(StanceKGError):
    """Invalid configuration value."""


class TrainingDivergenceError(StanceKGError):
    """A non-finite gradient was encountered during training."""

    def __init__(self, param_name: str):
        self.param_name = param_name
        super().__init__(f"non-finite gradient for parameter '{param_name}'")

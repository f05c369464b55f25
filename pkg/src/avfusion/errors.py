"""Exception types shared across the toolkit."""


class AffFormatError(ValueError):
    """Raised when an AFF1 tensor file is malformed or holds non-finite data."""


class ManifestError(ValueError):
    """Raised when a dataset manifest violates its format or invariants."""


class UndefinedCorrelationError(ValueError):
    """Raised when a correlation (Pearson or concordance) has no defined value,
    e.g. a constant input vector. Callers must handle this explicitly; silently
    returning 0 would corrupt model comparisons."""


class DivergenceError(RuntimeError):
    """Raised when training produces a non-finite loss or parameter."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class ConvergenceError(RuntimeError):
    """Raised when an iterative solver exhausts its iteration budget."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual

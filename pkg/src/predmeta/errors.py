"""Exception types raised by predmeta."""


class PredMetaError(Exception):
    """Base class for all predmeta errors."""


class DataError(PredMetaError, ValueError):
    """Invalid study-level input (bad variances, too few studies, bad CSV)."""


class MethodUnavailable(PredMetaError):
    """An interval method cannot be applied to the given data (e.g. K < 3)."""


class NumericalError(PredMetaError, ArithmeticError):
    """A numerical routine failed (degenerate spectrum, leverage, bracket)."""


class ConvergenceError(NumericalError):
    """A series or iteration did not converge within its budget.

    Attributes
    ----------
    partial : float
        Value accumulated when the budget ran out.
    bound : float
        Error bound on ``partial`` at that point.
    """

    def __init__(self, message, partial=float("nan"), bound=float("nan")):
        super().__init__(message)
        self.partial = partial
        self.bound = bound

"""Exception and warning types shared across the package."""


class TvlsError(Exception):
    """Base class for all package errors."""


class PreconditionError(TvlsError, ValueError):
    """An operation was called with inputs violating its contract."""


class SmoothnessError(PreconditionError):
    """A coefficient function lacks the continuity/differentiability required."""


class ZeroVarianceError(PreconditionError):
    """The driving noise is degenerate (zero variance)."""


class GridMismatchError(PreconditionError):
    """Two sampled grids that must coincide do not."""


class DivergenceError(TvlsError):
    """An iterative scheme failed to converge.

    Carries the sequence of term norms observed so the caller can inspect
    whether the series was diverging or merely slow.
    """

    def __init__(self, message, term_norms=None):
        super().__init__(message)
        self.term_norms = list(term_norms) if term_norms is not None else []


class PostconditionError(TvlsError):
    """A computed result failed its own validation check."""


class TailMassWarning(UserWarning):
    """A truncated grid may be missing non-negligible tail mass."""


class TruncationWarning(UserWarning):
    """An integrand was truncated before it decayed to negligible size."""

"""Exception hierarchy shared by every module in the package."""


class GlimpsError(Exception):
    """Base class for all package errors."""


class DomainError(GlimpsError, ValueError):
    """An argument is outside the domain of the operation."""


class RankDeficientError(GlimpsError, ValueError):
    """A matrix that must have full column rank does not.

    Attributes
    ----------
    rank : int
        Numerical rank estimated from the pivoted QR factorization.
    """

    def __init__(self, rank, cols=None):
        self.rank = int(rank)
        self.cols = cols
        msg = f"matrix is rank deficient (estimated rank {self.rank}"
        if cols is not None:
            msg += f" < {cols} columns"
        super().__init__(msg + ")")


class ZeroVectorError(GlimpsError, ValueError):
    """A ratio was requested for the zero vector."""


class DegenerateActiveSetError(GlimpsError):
    """Every single-coordinate removal leaves a rank-deficient basis."""


class ConfigError(GlimpsError, ValueError):
    """Configuration values are inconsistent with the problem dimensions."""


class BudgetError(GlimpsError):
    """An enumeration would exceed its size guard."""


class SolverError(GlimpsError):
    """The LP or branch-and-bound backend failed unexpectedly."""


class ExportError(GlimpsError, OSError):
    """Writing a model file failed."""

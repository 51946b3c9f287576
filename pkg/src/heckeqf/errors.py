"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


class UnsupportedDiscriminantError(DomainError):
    """Discriminant is valid but not handled (e.g. class number > 1)."""


class RangeError(IndexError):
    """Requested index lies beyond a cache or table bound."""


class IncompleteInputError(ValueError):
    """Input map is missing required entries."""


class DeligneViolation(ArithmeticError):
    """A normalized prime coefficient exceeded 2 in absolute value.

    Deligne's bound is a theorem, so this always means a coefficient bug.
    """


class ConvergenceError(ValueError):
    """Evaluation requested outside the half plane of convergence."""


class ResolutionError(ValueError):
    """Grid too coarse for the requested computation."""


class InsufficientDataError(ValueError):
    """Too few usable data points for a fit."""


class CacheError(RuntimeError):
    """Coefficient cache failed validation."""

"""Exception and warning types shared across the package."""


class SobstabError(Exception):
    """Base class for all package errors."""


class DomainError(SobstabError, ValueError):
    pass


class EvalError(SobstabError):
    pass


class GridMismatch(SobstabError, ValueError):
    pass


class ConvergenceError(SobstabError):
    pass


class NullField(SobstabError, ValueError):
    pass


class NormalizationError(SobstabError, ValueError):
    pass


class NumericalError(SobstabError):
    pass


class BracketError(SobstabError):
    pass


class UnsupportedField(SobstabError, ValueError):
    pass


class WindowWarning(UserWarning):
    """Raised as a warning when a finite u-window truncates visible mass."""

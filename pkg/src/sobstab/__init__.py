"""Numerical toolkit for the sharp Sobolev inequality with a continuous radial dimension.

Functions on R^m x R^n are handled in log-polar coordinates; the package provides the
extremal family and sharp constant, the second-variation spectra at the extremal,
the duality-map expansion bounds, and a concentration-compactness toolkit.
"""
from .errors import (BracketError, ConvergenceError, DomainError, EvalError, GridMismatch,
                     NormalizationError, NullField, NumericalError, SobstabError,
                     UnsupportedField, WindowWarning)
from .params_special import Params, make_params

__version__ = "0.1.0"

__all__ = ["Params", "make_params", "SobstabError", "DomainError", "EvalError", "GridMismatch",
           "ConvergenceError", "NullField", "NormalizationError", "NumericalError",
           "BracketError", "UnsupportedField", "WindowWarning", "__version__"]

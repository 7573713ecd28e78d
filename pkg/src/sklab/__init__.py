"""Numerical laboratory for the generalized sine kernel and cyclic integrals."""

from sklab.expr import AnalyticExpr, parse, differentiate
from sklab.kernel import ModelSpec, NystromSystem, assemble, log_fredholm_det

__all__ = [
    "AnalyticExpr",
    "ModelSpec",
    "NystromSystem",
    "assemble",
    "differentiate",
    "log_fredholm_det",
    "parse",
]

__version__ = "0.1.0"

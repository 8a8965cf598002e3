"""Successive-approximation solver for hyperbolic Monge-Ampere equations
A + B z_xx + C z_xy + D z_yy + (z_xx z_yy - z_xy^2) = 0 in Riemann invariants,
with a hypothesis checker and the Ampere contact transformation."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .coeffs import CoefficientSet, RiemannState, rhs
from .errors import (ConfigError, DomainError, ExpressionSyntaxError, FreeAxisError,
                     HyperbolicityError, NonGraphicalImage, NotConverged, OutOfDomain,
                     SeparationError, UnknownIdentifier)
from .expr import JetPoint, differentiate, evaluate, parse
from .initdata import InitialData, YGrid, from_rs, from_zp
from .solver import SolveResult, SolverConfig, solve

__all__ = [
    "CoefficientSet", "RiemannState", "rhs", "ConfigError", "DomainError",
    "ExpressionSyntaxError", "FreeAxisError", "HyperbolicityError", "NonGraphicalImage",
    "NotConverged", "OutOfDomain", "SeparationError", "UnknownIdentifier", "JetPoint",
    "differentiate", "evaluate", "parse", "InitialData", "YGrid", "from_rs", "from_zp",
    "SolveResult", "SolverConfig", "solve",
]

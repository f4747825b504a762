"""Isostables and basins of attraction of monotone systems.

The package estimates the dominant Koopman eigenfunction of a stable
equilibrium pointwise, turns it (or plain convergence) into a 0/1 oracle and
brackets the oracle's level set between two antichains in the state order.
"""

from .expr import DomainError, ExpressionError, ParseError, eval_expression, parse_expression
from .levelset import LevelSetResult, SamplerConfig, StandardFrame, run_algorithm1
from .models import PRESETS, VectorFieldModel, builtin_model, model_from_expressions, resolve_preset
from .ode import Trajectory, flow_endpoint, integrate
from .order import AntichainSet, OrthantCone, check_kamke_muller, compare, prune
from .spectral import (
    BasinOracle,
    IsostableOracle,
    SpectralData,
    dominant_eigenpair,
    find_equilibria,
    laplace_average_s1,
)

__version__ = "0.1.0"

__all__ = [
    "AntichainSet",
    "BasinOracle",
    "DomainError",
    "ExpressionError",
    "IsostableOracle",
    "LevelSetResult",
    "OrthantCone",
    "PRESETS",
    "ParseError",
    "SamplerConfig",
    "SpectralData",
    "StandardFrame",
    "Trajectory",
    "VectorFieldModel",
    "builtin_model",
    "check_kamke_muller",
    "compare",
    "dominant_eigenpair",
    "eval_expression",
    "find_equilibria",
    "flow_endpoint",
    "integrate",
    "laplace_average_s1",
    "model_from_expressions",
    "parse_expression",
    "prune",
    "resolve_preset",
    "run_algorithm1",
]

"""
hetlab: invertibility diagnostics for GARCH-type volatility filters.

Simulates a true volatility path together with its recursive filter on the
same innovations, estimates the stability coefficient that decides whether
filter errors contract or expand, and drives the experiments built on it.
"""

__version__ = "0.1.0"

from .errors import ConfigurationError, DivergenceError, NumericDomainError, UnsupportedDensityError
from .innovations import InnovationDist, exp_mixture, from_name, rademacher, standard_normal
from .models import Egarch, Garch, Vgarch, make_model
from .coupled_sim import SimConfig, simulate_coupled, simulate_coupled_coords, simulate_true_path
from .stability import LambdaEstimate, classify, lambda_egarch_closed, lambda_ergodic, lambda_quadrature

__all__ = [
    "ConfigurationError",
    "DivergenceError",
    "Egarch",
    "Garch",
    "InnovationDist",
    "LambdaEstimate",
    "NumericDomainError",
    "SimConfig",
    "UnsupportedDensityError",
    "Vgarch",
    "classify",
    "exp_mixture",
    "from_name",
    "lambda_egarch_closed",
    "lambda_ergodic",
    "lambda_quadrature",
    "make_model",
    "rademacher",
    "simulate_coupled",
    "simulate_coupled_coords",
    "simulate_true_path",
    "standard_normal",
]

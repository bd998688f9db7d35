"""Capacity region boundary of Gaussian multiple-access fading channels.

Computes boundary points of the ergodic capacity region under long-term
average power constraints: per-user power prices are solved so the
water-filling-style allocation meets the budgets, boundary rates follow from
adaptive quadrature of the winner-probability kernel (with corrected handling
of negative CDF arguments), and an independent Monte Carlo simulator of the
per-state marginal-utility auction cross-checks every number.
"""

from .boundary import (
    BoundaryPoint,
    ModeComparison,
    compare_modes,
    rate_point,
    simplex_grid,
    sweep,
)
from .fading import (
    ExponentialGain,
    FadingDistribution,
    PiecewiseLinearEmpirical,
    UniformGain,
)
from .kernel import (
    CdfMode,
    ChannelConfig,
    LambdaVector,
    RateAwardVector,
    UserSpec,
    case_boundary,
    cdf_factor,
    clip_star,
    cross_argument,
    power_integrand,
    rate_integrand,
    win_probability,
)
from .montecarlo import (
    FadingState,
    McEstimate,
    WinnerPartition,
    estimate,
    estimate_win_probability,
    per_state_allocation,
    utility,
    winner_partition,
)
from .quadrature import IntegrationRequest, IntegrationResult, QuadratureError, integrate
from .solver import SolverError, SolverResult, SolverSettings, achieved_power, solve_lambda

__version__ = "0.1.0"

__all__ = [
    "BoundaryPoint",
    "CdfMode",
    "ChannelConfig",
    "ExponentialGain",
    "FadingDistribution",
    "FadingState",
    "IntegrationRequest",
    "IntegrationResult",
    "LambdaVector",
    "McEstimate",
    "ModeComparison",
    "PiecewiseLinearEmpirical",
    "QuadratureError",
    "RateAwardVector",
    "SolverError",
    "SolverResult",
    "SolverSettings",
    "UniformGain",
    "UserSpec",
    "WinnerPartition",
    "achieved_power",
    "case_boundary",
    "cdf_factor",
    "clip_star",
    "compare_modes",
    "cross_argument",
    "estimate",
    "estimate_win_probability",
    "integrate",
    "per_state_allocation",
    "power_integrand",
    "rate_integrand",
    "rate_point",
    "simplex_grid",
    "solve_lambda",
    "sweep",
    "utility",
    "win_probability",
    "winner_partition",
]

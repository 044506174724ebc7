"""Simulation and verification toolkit for empirical processes of locally
stationary time series."""

__version__ = "0.1.0"

from .process import CoefFunction, Innovation, ProcessSpec, simulate_path, simulate_stationary  # noqa: E402
from .dependence import delta_profile, estimate_delta, fit_decay  # noqa: E402
from .rates import DeltaSequence, q_star, r_of_delta  # noqa: E402

__all__ = [
    "CoefFunction",
    "Innovation",
    "ProcessSpec",
    "simulate_path",
    "simulate_stationary",
    "delta_profile",
    "estimate_delta",
    "fit_decay",
    "DeltaSequence",
    "q_star",
    "r_of_delta",
]

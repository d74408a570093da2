"""Conservative Crank-Nicolson finite differences for u_t + u u_x + u_xxx = 0."""

from .errors import (ConfigurationError, ConsistencyError, DimensionError, DomainError,
                     InputError, KdvError, NonConvergenceError, SolverFailure)
from .lattice import (Grid, GridFunction, WeightProfile, build_weight, inner, norm_h3,
                      norm_inf, norm_l2, norm_p, weighted_inner)
from .stepper import Regime, RunState, StepperConfig, StepStats, cfl_dt, cn_step, evolve, solve_linear

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "ConsistencyError", "DimensionError", "DomainError", "InputError",
    "KdvError", "NonConvergenceError", "SolverFailure", "Grid", "GridFunction",
    "WeightProfile", "build_weight", "inner", "norm_h3", "norm_inf", "norm_l2", "norm_p",
    "weighted_inner", "Regime", "RunState", "StepperConfig", "StepStats", "cfl_dt", "cn_step",
    "evolve", "solve_linear",
]

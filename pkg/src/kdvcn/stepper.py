"""Crank-Nicolson time stepping with a fixed-point inner iteration.

One step solves

    u^{n+1} = u^n - dt G(u^{n+1/2}) - dt D-DD+ u^{n+1/2},  u^{n+1/2} = (u^n + u^{n+1})/2

by iterating

    (I + dt/2 D-DD+) w^{l+1} = u^n - dt G((u^n + w^l)/2) - dt/2 D-DD+ u^n,  w^0 = u^n,

so every sweep costs one solve with a fixed circulant operator.
"""

from __future__ import annotations

import enum
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from . import kernels
from .errors import (ConfigurationError, ConsistencyError, DomainError, KdvError,
                     NonConvergenceError, SolverFailure)
from .lattice import Grid, GridFunction, WeightProfile, norm_h3, norm_l2, norm_p


class Regime(str, enum.Enum):
    """Which CFL law picks the step: smooth (h^3) or rough (weighted l2) data."""

    H3 = "H3"
    L2 = "L2"


@dataclass(frozen=True)
class StepperConfig:
    L: float = 0.5
    regime: Regime = Regime.H3
    fp_tol: float = 1e-12
    fp_max_iter: int = 50
    lin_tol: float = 1e-12
    dt_cap: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        if not 0.0 < self.L < 1.0:
            raise ConfigurationError(f"L must lie in (0, 1), got {self.L}")
        if not (self.fp_tol > 0 and self.lin_tol > 0):
            raise ConfigurationError("tolerances must be positive")
        if int(self.fp_max_iter) != self.fp_max_iter or self.fp_max_iter < 1:
            raise ConfigurationError(f"fp_max_iter must be a positive integer, got {self.fp_max_iter}")
        if self.dt_cap is not None and not self.dt_cap > 0:
            raise ConfigurationError(f"dt_cap must be positive, got {self.dt_cap}")

    @property
    def K(self) -> float:
        if self.regime is Regime.H3:
            return (4.0 - self.L) / (1.0 - self.L)
        return (5.0 - self.L) / (1.0 - self.L)


@dataclass(frozen=True)
class StepStats:
    dt_used: float
    fp_iterations: int
    final_increment_norm: float
    lin_residual_max: float
    l2_before: float
    l2_after: float
    # largest ||dw^l|| / ||dw^(l-1)|| for l >= 2; 0 if fewer than 3 sweeps
    max_increment_ratio: float = 0.0


@dataclass(frozen=True)
class RunState:
    u: GridFunction
    t: float = 0.0
    step_index: int = 0
    last_stats: Optional[StepStats] = None


# --- linear solve ---------------------------------------------------------

_SOLVERS: "OrderedDict[tuple, object]" = OrderedDict()
_SOLVER_CACHE_SIZE = 8


def get_solver(grid: Grid, dt: float, lin_tol: float = 1e-12, backend: Optional[str] = None):
    """Factorised (I + dt/2 D-DD+) for this grid and step, memoised."""
    backend = backend or kernels.BACKEND
    key = (backend, grid.n_cells, grid.dx, float(dt), float(lin_tol))
    solver = _SOLVERS.get(key)
    if solver is None:
        solver = kernels.solver_class(backend)(grid.n_cells, grid.dx, float(dt), lin_tol)
        _SOLVERS[key] = solver
        if len(_SOLVERS) > _SOLVER_CACHE_SIZE:
            _SOLVERS.popitem(last=False)
    else:
        _SOLVERS.move_to_end(key)
    return solver


def solve_linear(rhs: GridFunction, dt: float, lin_tol: float = 1e-12) -> GridFunction:
    """Solve (I + dt/2 D-DD+) w = rhs to relative residual ``lin_tol``."""
    if dt < 0:
        raise DomainError(f"dt must be non-negative, got {dt}")
    vals = rhs.values
    if not np.any(vals):
        return GridFunction.zeros(rhs.grid)
    if dt == 0:
        return GridFunction._trusted(rhs.grid, vals.copy())
    solver = get_solver(rhs.grid, dt, lin_tol)
    w = solver.solve(vals)
    res = kernels.impl.relative_residual(w, vals, rhs.grid.dx, dt)
    if not res <= lin_tol:
        raise SolverFailure(f"linear solve residual {res:.3e} exceeds {lin_tol:.1e}", res)
    return GridFunction._trusted(rhs.grid, w)


# --- time step selection --------------------------------------------------


def cfl_dt(u: GridFunction, cfg: StepperConfig, wp: Optional[WeightProfile] = None) -> float:
    """Largest step allowed by the configured CFL law.

    H3: dt = L dx / (K ||u||_h3),            K = (4-L)/(1-L)
    L2: dt = 7L dx^1.5 / (8 K ||u||_p),       K = (5-L)/(1-L), also dt <= 1/(4 c_R)
    Either way ``cfg.dt_cap`` bounds the result.
    """
    dx = u.grid.dx
    cap = math.inf if cfg.dt_cap is None else cfg.dt_cap
    if cfg.regime is Regime.H3:
        size = norm_h3(u)
        law = cfg.L * dx / (cfg.K * size) if size > 0 else math.inf
    else:
        if wp is None:
            raise ConfigurationError("the L2 regime needs a weight profile")
        size = norm_p(u, wp)
        law = 7.0 * cfg.L * dx**1.5 / (8.0 * cfg.K * size) if size > 0 else math.inf
        law = min(law, 1.0 / (4.0 * wp.c_R))
    if size == 0 and cfg.dt_cap is None:
        raise ConfigurationError("zero data gives no CFL bound; set dt_cap")
    return min(cap, law)


def cfl_ratio(u: GridFunction, cfg: StepperConfig, wp: Optional[WeightProfile] = None) -> float:
    """The CFL bound as a step ratio: dt/dx (H3) or dt/dx^1.5 (L2), uncapped."""
    if cfg.regime is Regime.H3:
        return cfg.L / (cfg.K * norm_h3(u))
    if wp is None:
        raise ConfigurationError("the L2 regime needs a weight profile")
    return 7.0 * cfg.L / (8.0 * cfg.K * norm_p(u, wp))


# --- one step -------------------------------------------------------------


def cn_step(state: RunState, dt: float, cfg: StepperConfig) -> tuple[RunState, StepStats]:
    """Advance ``state`` by one Crank-Nicolson step of size ``dt``."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    u = state.u
    grid = u.grid
    k = kernels.impl
    vals = u.values
    l2_before = math.sqrt(grid.dx * k.dot(vals, vals))
    solver = get_solver(grid, dt, cfg.lin_tol)
    w, iters, inc, ratio, res, ok = k.cn_fixed_point(
        vals, dt, grid.dx, solver, cfg.fp_tol, int(cfg.fp_max_iter))
    if not ok:
        raise NonConvergenceError(
            f"fixed point not converged after {iters} sweeps (last increment {inc:.3e}); "
            f"dt={dt:.3e} probably violates the CFL bound", inc,
            state.step_index, state.t)
    if not res <= cfg.lin_tol:
        raise SolverFailure(f"linear solve residual {res:.3e} exceeds {cfg.lin_tol:.1e}", res)
    if not np.all(np.isfinite(w)):
        raise ConsistencyError("non-finite values after step")
    l2_after = math.sqrt(grid.dx * k.dot(w, w))
    if abs(l2_after - l2_before) > 10.0 * (cfg.fp_tol + cfg.lin_tol) * l2_before:
        raise ConsistencyError(
            f"l2 norm drifted from {l2_before!r} to {l2_after!r} in one step")
    stats = StepStats(dt, int(iters), float(inc), float(res), l2_before, l2_after, float(ratio))
    new = RunState(GridFunction._trusted(grid, w), state.t + dt, state.step_index + 1, stats)
    return new, stats


# --- evolution ------------------------------------------------------------

Observer = Callable[[GridFunction, RunState], None]

_LOG_FIELDS = ("t", "dt_used", "fp_iterations", "final_increment_norm",
               "lin_residual_max", "l2_before", "l2_after", "max_increment_ratio")


@dataclass
class RunLog:
    """Per-step telemetry of an evolution, one entry per accepted step."""

    columns: dict = field(default_factory=lambda: {name: [] for name in _LOG_FIELDS})

    def append(self, t: float, s: StepStats):
        c = self.columns
        c["t"].append(t)
        c["dt_used"].append(s.dt_used)
        c["fp_iterations"].append(s.fp_iterations)
        c["final_increment_norm"].append(s.final_increment_norm)
        c["lin_residual_max"].append(s.lin_residual_max)
        c["l2_before"].append(s.l2_before)
        c["l2_after"].append(s.l2_after)
        c["max_increment_ratio"].append(s.max_increment_ratio)

    def __len__(self):
        return len(self.columns["t"])

    def __getitem__(self, name) -> np.ndarray:
        return np.asarray(self.columns[name])


def evolve(u0: GridFunction, t_end: float, cfg: StepperConfig,
           wp: Optional[WeightProfile] = None, observers: Iterable[Observer] = (),
           dt: Optional[float] = None, t_start: float = 0.0) -> tuple[RunState, RunLog]:
    """Step from ``t_start`` to ``t_end``, landing exactly on ``t_end``.

    With ``dt=None`` the step is re-chosen by :func:`cfl_dt` before every
    step; otherwise ``dt`` is used throughout (still bounded by
    ``cfg.dt_cap``). The final step is shortened to hit ``t_end``.
    Observers are called as ``obs(u_before, new_state)`` after each step.
    """
    if not t_end > t_start:
        raise DomainError(f"t_end={t_end} must exceed t_start={t_start}")
    observers = tuple(observers)
    state = RunState(u0, t_start, 0, None)
    log = RunLog()
    fixed = None
    if dt is not None:
        if not dt > 0:
            raise ConfigurationError(f"dt must be positive, got {dt}")
        fixed = dt if cfg.dt_cap is None else min(dt, cfg.dt_cap)
    trivial = not np.any(u0.values)
    while state.t < t_end:
        remaining = t_end - state.t
        if fixed is not None:
            step = fixed
        elif trivial and cfg.dt_cap is None:
            step = remaining
        else:
            step = cfl_dt(state.u, cfg, wp)
        if step >= remaining or remaining - step <= 1e-9 * step:
            step = remaining
        u_prev = state.u
        try:
            new, stats = cn_step(state, step, cfg)
        except KdvError as exc:
            exc.step_index = state.step_index
            exc.t = state.t
            exc.args = (f"{exc.args[0]} [step {state.step_index}, t={state.t!r}]",) + exc.args[1:]
            raise
        if step == remaining:
            new = RunState(new.u, t_end, new.step_index, new.last_stats)
        state = new
        log.append(state.t, stats)
        for obs in observers:
            obs(u_prev, state)
    return state, log

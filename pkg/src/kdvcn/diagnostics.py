"""Reported quantities: relative error, conserved-quantity ratios, rates, norm
trajectories and the local smoothing accumulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError
from .lattice import GridFunction, WeightProfile, _same_grid, norm_h3, norm_l2, norm_p
from .stepper import RunState

# denominators below this fraction of their natural scale count as zero
NA_THRESHOLD = 1e-12


@dataclass(frozen=True)
class ConservationRecord:
    """Ratios of mass, l2 norm and energy to their initial values.

    A ratio whose denominator vanishes is ``None`` (not applicable).
    """

    c1: Optional[float]
    c2: Optional[float]
    c3: Optional[float]
    t: float = 0.0


def _mass(u: GridFunction) -> tuple[float, float]:
    dx = u.grid.dx
    return dx * float(np.sum(u.values)), dx * float(np.sum(np.abs(u.values)))


def _energy(u: GridFunction) -> tuple[float, float]:
    k = kernels.impl
    dx = u.grid.dx
    v = u.values
    dp = k.d_plus(v, dx)
    grad = dx * k.dot(dp, dp)
    cubic = dx * k.dot(v * v, v) / 3.0
    return grad - cubic, grad + abs(cubic)


def _ratio(num: float, den: float, scale: float) -> Optional[float]:
    if scale == 0.0 or abs(den) <= NA_THRESHOLD * scale:
        return None
    return num / den


def conserved(u: GridFunction, u0: GridFunction, t: float = 0.0) -> ConservationRecord:
    """C1 = mass ratio, C2 = l2 ratio, C3 = energy ratio with D+ as the derivative."""
    _same_grid(u, u0)
    m, _ = _mass(u)
    m0, m0_scale = _mass(u0)
    n0 = norm_l2(u0)
    e, _ = _energy(u)
    e0, e0_scale = _energy(u0)
    return ConservationRecord(
        _ratio(m, m0, m0_scale),
        _ratio(norm_l2(u), n0, n0),
        _ratio(e, e0, e0_scale),
        float(t),
    )


def restrict(ref: GridFunction, coarse) -> GridFunction:
    """Values of ``ref`` at the nodes of the coarser nested grid ``coarse``."""
    if ref.grid == coarse:
        return ref
    if not coarse.is_nested_in(ref.grid):
        raise DimensionError(f"{coarse} is not nested in {ref.grid}")
    stride = ref.grid.n_cells // coarse.n_cells
    return GridFunction(coarse, ref.values[::stride])


def relative_error(u: GridFunction, ref: GridFunction) -> float:
    """||u - ref|| / ||ref|| on the nodes of u's grid.

    ``ref`` may live on a finer nested grid; it is restricted by index stride.
    On a uniform periodic grid the trapezoidal rule is the dx-weighted sum.
    """
    r = restrict(ref, u.grid)
    k = kernels.impl
    diff = u.values - r.values
    den = k.dot(r.values, r.values)
    if den == 0.0:
        raise DomainError("reference is identically zero")
    return math.sqrt(k.dot(diff, diff) / den)


def rate(e_coarse: float, n_coarse: int, e_fine: float, n_fine: int) -> float:
    """(ln E(N1) - ln E(N2)) / (ln N2 - ln N1)."""
    if not (e_coarse > 0 and e_fine > 0):
        raise DomainError(f"errors must be positive, got {e_coarse}, {e_fine}")
    if not (n_coarse > 0 and n_fine > 0) or n_coarse == n_fine:
        raise DomainError(f"need distinct positive grid sizes, got {n_coarse}, {n_fine}")
    return (math.log(e_coarse) - math.log(e_fine)) / (math.log(n_fine) - math.log(n_coarse))


# --- smoothing ------------------------------------------------------------


@dataclass(frozen=True)
class SmoothingAccumulator:
    """Running dt dx sum over steps of (D+ u^{n+1/2})^2 on |x_j| <= R-1."""

    radius_R: float
    total: float = 0.0


def smoothing_update(acc: SmoothingAccumulator, u_half: GridFunction,
                     dt: float) -> SmoothingAccumulator:
    g = u_half.grid
    mask = np.abs(g.x) <= acc.radius_R - 1.0
    dp = kernels.impl.d_plus(u_half.values, g.dx)[mask]
    inc = dt * g.dx * kernels.impl.dot(dp, dp) if dp.size else 0.0
    return replace(acc, total=acc.total + inc)


def track_h3(u: GridFunction) -> float:
    return norm_h3(u)


def track_p(u: GridFunction, wp: WeightProfile) -> float:
    return norm_p(u, wp)


# --- observers for stepper.evolve -----------------------------------------


@dataclass
class ConservationTracker:
    """Records a ConservationRecord after every step."""

    u0: GridFunction
    records: list = field(default_factory=list)

    def __call__(self, u_prev: GridFunction, state: RunState):
        self.records.append(conserved(state.u, self.u0, state.t))

    def max_c2_drift(self) -> float:
        return max((abs(r.c2 - 1.0) for r in self.records if r.c2 is not None), default=0.0)


@dataclass
class SmoothingObserver:
    acc: SmoothingAccumulator
    history: list = field(default_factory=list)

    def __call__(self, u_prev: GridFunction, state: RunState):
        half = GridFunction._trusted(u_prev.grid, 0.5 * (u_prev.values + state.u.values))
        self.acc = smoothing_update(self.acc, half, state.last_stats.dt_used)
        self.history.append(self.acc.total)


@dataclass
class NormTracker:
    """Per-step h3 norm, and the weighted norm when a profile is given."""

    wp: Optional[WeightProfile] = None
    every: int = 1
    h3: list = field(default_factory=list)
    p: list = field(default_factory=list)

    def __call__(self, u_prev: GridFunction, state: RunState):
        if state.step_index % self.every:
            return
        self.h3.append(track_h3(state.u))
        if self.wp is not None:
            self.p.append(track_p(state.u, self.wp))

"""Piecewise-cubic-in-space, linear-in-time reconstruction between two time levels.

On a cell [x_j, x_{j+1}) with s = x - x_j,

    P^n(x) = u_j + s D+u_j + s^2/2 D+D-u_j + s^3/6 D+DD-u_j

and the slab value at t is the linear blend of P^n and P^{n+1}. The blend is
written as (1-theta) P^n + theta P^{n+1}, which is the same polynomial as
P^n + (t - t_n) D+^t P^n but reproduces node values exactly at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DimensionError, DomainError
from .lattice import GridFunction


def _coefficients(u: GridFunction) -> np.ndarray:
    k = kernels.impl
    dx = u.grid.dx
    v = u.values
    d1 = k.d_plus(v, dx)
    d2 = k.d_plus(k.d_minus(v, dx), dx)
    d3 = k.d_plus(k.d_central(k.d_minus(v, dx), dx), dx)
    return np.stack([v, d1, d2, d3])


@dataclass(frozen=True, eq=False)
class SpaceTimeSlab:
    u_lo: GridFunction
    u_hi: GridFunction
    t_lo: float
    t_hi: float
    _c_lo: np.ndarray = field(init=False, repr=False)
    _c_hi: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.u_lo.grid != self.u_hi.grid:
            raise DimensionError("slab levels live on different grids")
        if not self.t_hi > self.t_lo:
            raise DomainError(f"need t_hi > t_lo, got [{self.t_lo}, {self.t_hi}]")
        object.__setattr__(self, "_c_lo", _coefficients(self.u_lo))
        object.__setattr__(self, "_c_hi", _coefficients(self.u_hi))

    @property
    def grid(self):
        return self.u_lo.grid

    @property
    def dt(self) -> float:
        return self.t_hi - self.t_lo

    def _theta(self, t: float) -> float:
        if not self.t_lo <= t <= self.t_hi:
            raise DomainError(f"t={t} outside slab [{self.t_lo}, {self.t_hi}]")
        return (t - self.t_lo) / self.dt

    def _locate(self, x):
        """Cell index and offset s = x - x_j after periodic reduction."""
        g = self.grid
        x = np.asarray(x, dtype=float)
        outside = (x < g.x_left) | (x >= g.x_right)
        if np.any(outside):
            x = np.where(outside, np.mod(x - g.x_left, g.length) + g.x_left, x)
        j = np.floor((x - g.x_left) / g.dx).astype(np.int64)
        j = np.clip(j, 0, g.n_cells - 1)
        # floor can land one cell off when x sits on a node; fix against the node formula
        xj = g.x_left + g.dx * j
        below = x < xj
        j = np.where(below, j - 1, j)
        xn = g.x_left + g.dx * (j + 1)
        above = (x >= xn) & (j + 1 < g.n_cells)
        j = np.where(above, j + 1, j)
        j = np.mod(j, g.n_cells)
        s = x - (g.x_left + g.dx * j)
        return j, s


def _poly(c: np.ndarray, j, s, order: int):
    v, d1, d2, d3 = c[0][j], c[1][j], c[2][j], c[3][j]
    if order == 0:
        return v + s * d1 + 0.5 * s * s * d2 + s * s * s * d3 / 6.0
    if order == 1:
        return d1 + s * d2 + 0.5 * s * s * d3
    if order == 2:
        return d2 + s * d3
    return d3 + 0.0 * s


def _blend(slab: SpaceTimeSlab, x, t, order: int):
    th = slab._theta(t)
    j, s = slab._locate(x)
    lo = _poly(slab._c_lo, j, s, order)
    hi = _poly(slab._c_hi, j, s, order)
    out = (1.0 - th) * lo + th * hi
    return float(out) if np.ndim(out) == 0 else out


def eval(slab: SpaceTimeSlab, x, t: float):  # noqa: A001 - mirrors the operation name
    """u_dx(x, t); ``x`` may be a scalar or an array."""
    return _blend(slab, x, t, 0)


def eval_dx(slab: SpaceTimeSlab, x, t: float, order: int = 1):
    """Spatial derivative of order 1, 2 or 3 of the piecewise polynomial."""
    if order not in (1, 2, 3):
        raise DomainError(f"derivative order must be 1, 2 or 3, got {order}")
    return _blend(slab, x, t, order)


def eval_dt(slab: SpaceTimeSlab, x, t: float | None = None):
    """(P^{n+1}(x) - P^n(x)) / dt, constant in t across the slab."""
    if t is not None:
        slab._theta(t)
    j, s = slab._locate(x)
    out = (_poly(slab._c_hi, j, s, 0) - _poly(slab._c_lo, j, s, 0)) / slab.dt
    return float(out) if np.ndim(out) == 0 else out


def cell_jump(slab: SpaceTimeSlab, t: float) -> np.ndarray:
    """eval(x_{j+1}^-) - eval(x_{j+1}^+) for every cell j, from the closed form.

    Equals dx^2/2 D+D-u_j + dx^3/6 D+DD-u_j blended in time.
    """
    th = slab._theta(t)
    dx = slab.grid.dx
    out = []
    for c in (slab._c_lo, slab._c_hi):
        out.append(0.5 * dx * dx * c[2] + dx * dx * dx * c[3] / 6.0)
    return (1.0 - th) * out[0] + th * out[1]


__all__ = ["SpaceTimeSlab", "eval", "eval_dx", "eval_dt", "cell_jump"]

"""Periodic grids, grid functions, inner products, norms and the weight profile."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigurationError, DimensionError, InputError

MIN_CELLS = 5


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice x_j = x_left + j*dx, j = 0..n_cells-1."""

    n_cells: int
    dx: float
    x_left: float = 0.0

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < MIN_CELLS:
            raise DimensionError(f"need at least {MIN_CELLS} cells, got {self.n_cells}")
        if not (self.dx > 0 and math.isfinite(self.dx)):
            raise ConfigurationError(f"dx must be positive and finite, got {self.dx}")
        object.__setattr__(self, "n_cells", int(self.n_cells))

    @classmethod
    def from_window(cls, x_left: float, x_right: float, n_cells: int) -> "Grid":
        if not x_right > x_left:
            raise ConfigurationError(f"empty window [{x_left}, {x_right})")
        return cls(n_cells, (x_right - x_left) / n_cells, x_left)

    @property
    def length(self) -> float:
        return self.n_cells * self.dx

    @property
    def x_right(self) -> float:
        return self.x_left + self.length

    @property
    def x(self) -> np.ndarray:
        return self.x_left + self.dx * np.arange(self.n_cells)

    def is_nested_in(self, fine: "Grid") -> bool:
        """True when every node of this grid is a node of ``fine``."""
        if fine.n_cells % self.n_cells:
            return False
        stride = fine.n_cells // self.n_cells
        return (math.isclose(fine.x_left, self.x_left, rel_tol=0, abs_tol=1e-12 * self.length)
                and math.isclose(fine.dx * stride, self.dx, rel_tol=1e-12))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on a :class:`Grid`. The value array is read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size != self.grid.n_cells:
            raise DimensionError(
                f"expected {self.grid.n_cells} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise InputError(f"non-finite value at node {bad}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def _trusted(cls, grid: Grid, values: np.ndarray) -> "GridFunction":
        # internal fast path: caller guarantees shape, dtype and finiteness
        obj = object.__new__(cls)
        values.flags.writeable = False
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        return obj

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls._trusted(grid, np.zeros(grid.n_cells))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "GridFunction":
        return cls(grid, np.full(grid.n_cells, float(c)))

    def __len__(self):
        return self.grid.n_cells

    def _other(self, other):
        if isinstance(other, GridFunction):
            _same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._other(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values)


def _same_grid(v: GridFunction, w: GridFunction):
    if v.grid != w.grid:
        raise DimensionError(f"grid mismatch: {v.grid} vs {w.grid}")


def inner(v: GridFunction, w: GridFunction) -> float:
    """dx * sum_j v_j w_j, summed left to right."""
    _same_grid(v, w)
    return v.grid.dx * kernels.impl.dot(v.values, w.values)


def norm_l2(v: GridFunction) -> float:
    return math.sqrt(inner(v, v))


def norm_inf(v: GridFunction) -> float:
    return float(np.max(np.abs(v.values)))


def norm_h3(v: GridFunction) -> float:
    """||v|| + ||D+ v|| + ||D+D- v|| + ||D-DD+ v||."""
    k = kernels.impl
    dx = v.grid.dx
    vals = v.values
    dp = k.d_plus(vals, dx)
    dpdm = k.d_plus(k.d_minus(vals, dx), dx)
    d3 = k.d3(vals, dx)
    return sum(math.sqrt(dx * k.dot(a, a)) for a in (vals, dp, dpdm, d3))


# --- weight profile -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightProfile:
    """Samples of p = 1 + int omega^2 and its first three derivatives."""

    radius_R: float
    p: GridFunction
    p1: GridFunction
    p2: GridFunction
    p3: GridFunction
    c_R: float

    @property
    def grid(self) -> Grid:
        return self.p.grid


def weighted_inner(v: GridFunction, w: GridFunction, wp: WeightProfile) -> float:
    _same_grid(v, w)
    _same_grid(v, wp.p)
    return v.grid.dx * kernels.impl.dot(wp.p.values * v.values, w.values)


def norm_p(v: GridFunction, wp: WeightProfile) -> float:
    return math.sqrt(weighted_inner(v, v, wp))


def _step(s):
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def _step_d1(s):
    return 30.0 * s * s * (s - 1.0) ** 2


def _step_d2(s):
    return 60.0 * s * (1.0 + s * (-3.0 + 2.0 * s))


def omega_and_derivatives(x, radius_R):
    """omega, omega', omega'' for the C^2 quintic-smoothstep cutoff.

    omega = 1 on |x| < R, 0 on |x| >= R+1, and S(R+1-|x|) in between with
    S(s) = 6s^5 - 15s^4 + 10s^3.
    """
    x = np.asarray(x, dtype=float)
    s = np.clip(radius_R + 1.0 - np.abs(x), 0.0, 1.0)
    band = (s > 0.0) & (s < 1.0)
    w = _step(s)
    w1 = np.where(band, -np.sign(x) * _step_d1(s), 0.0)
    w2 = np.where(band, _step_d2(s), 0.0)
    return w, w1, w2


def _omega_sq(x, radius_R):
    return omega_and_derivatives(x, radius_R)[0] ** 2


def _p_on_points(x0, h, n_points, radius_R, sub):
    """p at x0 + k*h, k < n_points, by composite Simpson with ``sub`` panels per cell."""
    t = np.linspace(0.0, 1.0, sub + 1)
    weights = np.ones(sub + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= h / (3.0 * sub)
    starts = x0 + h * np.arange(n_points - 1)
    samples = _omega_sq(starts[:, None] + h * t[None, :], radius_R)
    cell = samples @ weights
    p = np.empty(n_points)
    p[0] = 1.0
    p[1:] = 1.0 + np.cumsum(cell)
    return p


FINE_FACTOR = 16
SUBSAMPLES = 64


def build_weight(grid: Grid, radius_R: float) -> WeightProfile:
    """Sample the weight p and its derivatives on ``grid``.

    The support [-R-1, R+1] of omega must fit inside the grid window so that
    p equals 1 at the left end.
    """
    if not radius_R > 0:
        raise ConfigurationError(f"radius must be positive, got {radius_R}")
    if not (grid.x_left < -radius_R - 1.0 and radius_R + 1.0 < grid.x_right):
        raise ConfigurationError(
            f"support [-{radius_R + 1}, {radius_R + 1}] does not fit in "
            f"[{grid.x_left}, {grid.x_right})")
    # p on a lattice FINE_FACTOR times finer; SUBSAMPLES panels per coarse cell
    h = grid.dx / FINE_FACTOR
    n_fine = grid.n_cells * FINE_FACTOR
    p_fine = _p_on_points(grid.x_left, h, n_fine, radius_R, SUBSAMPLES // FINE_FACTOR)
    x_fine = grid.x_left + h * np.arange(n_fine)
    w, w1, w2 = omega_and_derivatives(x_fine, radius_R)
    p1_f = w * w
    p2_f = 2.0 * w * w1
    p3_f = 2.0 * (w1 * w1 + w * w2)
    c_R = float(max(np.max(np.abs(a)) for a in (p_fine, p1_f, p2_f, p3_f)))

    sl = slice(None, None, FINE_FACTOR)
    mk = lambda a: GridFunction(grid, a[sl].copy())  # noqa: E731
    return WeightProfile(float(radius_R), mk(p_fine), mk(p1_f), mk(p2_f), mk(p3_f), c_R)

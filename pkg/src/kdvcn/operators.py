"""Discrete calculus on periodic grid functions.

Shifts, one-sided and central differences, the third difference
D-DD+, the tilde/bar averages and the nonlinear term G(u) = tilde(u) Du.
"""

from __future__ import annotations

from . import kernels
from .errors import DimensionError
from .lattice import MIN_CELLS, GridFunction


def _wrap(v: GridFunction, values) -> GridFunction:
    return GridFunction._trusted(v.grid, values)


def shift(v: GridFunction, k: int) -> GridFunction:
    """(shift(v, k))_j = v_{(j+k) mod n}; k = +1 is S+, k = -1 is S-."""
    return _wrap(v, kernels.impl.shift(v.values, int(k)))


def d_plus(v: GridFunction) -> GridFunction:
    return _wrap(v, kernels.impl.d_plus(v.values, v.grid.dx))


def d_minus(v: GridFunction) -> GridFunction:
    return _wrap(v, kernels.impl.d_minus(v.values, v.grid.dx))


def d_central(v: GridFunction) -> GridFunction:
    return _wrap(v, kernels.impl.d_central(v.values, v.grid.dx))


def d3(v: GridFunction) -> GridFunction:
    """D-DD+ v, the dispersive third difference.

    Stencil (v_{j+2} - 2v_{j+1} + 2v_{j-1} - v_{j-2}) / (2 dx^3), evaluated
    with the same arithmetic as ``d_minus(d_central(d_plus(v)))``.
    """
    if v.grid.n_cells < MIN_CELLS:
        raise DimensionError("third difference needs at least 5 nodes")
    return _wrap(v, kernels.impl.d3(v.values, v.grid.dx))


def tilde_avg(v: GridFunction) -> GridFunction:
    return _wrap(v, kernels.impl.tilde_avg(v.values))


def bar_avg(v: GridFunction) -> GridFunction:
    return _wrap(v, kernels.impl.bar_avg(v.values))


def nonlinear_g(v: GridFunction) -> GridFunction:
    """G(v) = tilde(v) * Dv, a second-order approximation of v v_x."""
    return _wrap(v, kernels.impl.nonlinear_g(v.values, v.grid.dx))

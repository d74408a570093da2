import numpy as np
import pytest

from kdvcn.errors import DimensionError, DomainError
from kdvcn.interpolant import SpaceTimeSlab, cell_jump, eval, eval_dt, eval_dx
from kdvcn.lattice import Grid, GridFunction


def random_slab(rng, n=40, x_left=-2.0, dx=0.1):
    g = Grid(n, dx, x_left)
    return SpaceTimeSlab(GridFunction(g, rng.standard_normal(n)),
                         GridFunction(g, rng.standard_normal(n)), 0.3, 0.31)


def smooth_slab(n):
    g = Grid.from_window(0.0, 2 * np.pi, n)
    return SpaceTimeSlab(GridFunction(g, np.sin(g.x)), GridFunction(g, np.sin(g.x - 0.01)),
                         0.0, 0.01)


def test_node_exactness(rng):
    s = random_slab(rng)
    x = s.grid.x
    for j in range(s.grid.n_cells):
        assert eval(s, x[j], s.t_lo) == s.u_lo.values[j]
        assert eval(s, x[j], s.t_hi) == s.u_hi.values[j]
    assert np.array_equal(eval(s, x, s.t_hi), s.u_hi.values)


def test_constant_function():
    g = Grid(10, 0.5)
    c = GridFunction.constant(g, 1.75)
    s = SpaceTimeSlab(c, c, 0.0, 1.0)
    xs = g.x + g.dx / 2
    assert np.allclose(eval(s, xs, 0.4), 1.75, rtol=0, atol=1e-15)
    for k in (1, 2, 3):
        assert not np.any(eval_dx(s, xs, 0.4, k))
    assert not np.any(eval_dt(s, xs))


def test_dt_vanishes_for_equal_levels(rng):
    s0 = random_slab(rng)
    s = SpaceTimeSlab(s0.u_lo, s0.u_lo, 0.0, 1.0)
    assert not np.any(eval_dt(s, np.linspace(-2, 2, 33)))


def test_time_outside_slab(rng):
    s = random_slab(rng)
    with pytest.raises(DomainError):
        eval(s, 0.0, 0.2)
    with pytest.raises(DomainError):
        eval_dx(s, 0.0, 0.5, 1)
    with pytest.raises(DomainError):
        eval_dx(s, 0.0, 0.305, 4)


def test_slab_validation(rng):
    a = GridFunction(Grid(8, 1.0), rng.standard_normal(8))
    b = GridFunction(Grid(9, 1.0), rng.standard_normal(9))
    with pytest.raises(DimensionError):
        SpaceTimeSlab(a, b, 0.0, 1.0)
    with pytest.raises(DomainError):
        SpaceTimeSlab(a, a, 1.0, 1.0)


def test_periodic_reduction(rng):
    s = random_slab(rng)
    L = s.grid.length
    for x in (-1.234, 0.05, 1.87):
        assert eval(s, x + L, 0.305) == pytest.approx(eval(s, x, 0.305), rel=1e-10)
        assert eval(s, x - 3 * L, 0.305) == pytest.approx(eval(s, x, 0.305), rel=1e-10)


@pytest.mark.parametrize("order", [1, 2, 3])
def test_derivative_consistency(rng, order):
    s = random_slab(rng)
    h = 1e-6 * s.grid.dx
    t = 0.3037
    # interior points, away from cell boundaries
    x = s.grid.x[3:-3] + s.grid.dx * rng.uniform(0.2, 0.8, s.grid.n_cells - 6)
    lower = (lambda y: eval(s, y, t)) if order == 1 else (lambda y: eval_dx(s, y, t, order - 1))
    fd = (lower(x + h) - lower(x - h)) / (2 * h)
    got = eval_dx(s, x, t, order)
    assert np.allclose(got, fd, rtol=1e-6, atol=1e-6 * np.max(np.abs(got)))


def test_eval_dt_matches_time_difference(rng):
    s = random_slab(rng)
    x = np.linspace(-1.9, 1.5, 17)
    fd = (eval(s, x, 0.309) - eval(s, x, 0.301)) / 0.008
    assert np.allclose(eval_dt(s, x), fd, rtol=1e-9, atol=1e-9)


def test_third_derivative_cellwise_constant(rng):
    s = random_slab(rng)
    j = 5
    xs = s.grid.x[j] + s.grid.dx * np.array([0.0, 0.3, 0.9])
    vals = eval_dx(s, xs, 0.305, 3)
    assert np.all(vals == vals[0])


def test_jump_closed_form(rng):
    s = random_slab(rng)
    g = s.grid
    t = 0.306
    left = eval(s, g.x[1:] - 1e-9 * g.dx, t)
    right = eval(s, g.x[1:], t)
    jumps = cell_jump(s, t)[:-1]
    assert np.allclose(left - right, jumps, rtol=1e-5, atol=1e-6)


def test_jump_is_second_order_for_smooth_data():
    # the cubic is not continuous for general data; for smooth data the gap is O(dx^2)
    js = []
    for n in (64, 128, 256):
        js.append(np.max(np.abs(cell_jump(smooth_slab(n), 0.005))))
    rates = np.log2(np.array(js[:-1]) / np.array(js[1:]))
    assert np.all(np.abs(rates - 2.0) < 0.1)


@pytest.mark.xfail(strict=True, reason="the displayed cubic is discontinuous at nodes for "
                   "generic data; the gap is dx^2/2 D+D-u + dx^3/6 D+DD-u")
def test_continuity_for_random_slabs(rng):
    s = random_slab(rng)
    g = s.grid
    scale = np.max(np.abs(s.u_lo.values)) + np.max(np.abs(s.u_hi.values))
    left = eval(s, g.x[1:] - 1e-12, 0.305)
    right = eval(s, g.x[1:], 0.305)
    assert np.max(np.abs(left - right)) <= 1e-12 * scale

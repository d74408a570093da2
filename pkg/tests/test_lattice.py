import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kdvcn.errors import ConfigurationError, DimensionError, InputError
from kdvcn.lattice import (Grid, GridFunction, build_weight, inner, norm_h3, norm_inf, norm_l2,
                           norm_p, omega_and_derivatives, weighted_inner)

from conftest import random_gf


def test_grid_rejects_fewer_than_five_cells():
    with pytest.raises(DimensionError):
        Grid(4, 1.0)


def test_grid_length_is_cells_times_dx():
    g = Grid.from_window(-10.0, 10.0, 2000)
    assert g.dx * g.n_cells == g.length
    assert g.x[0] == -10.0
    assert len(g.x) == 2000


def test_grid_rejects_bad_spacing():
    with pytest.raises(ConfigurationError):
        Grid(10, 0.0)
    with pytest.raises(ConfigurationError):
        Grid(10, float("nan"))


def test_gridfunction_validates():
    g = Grid(5, 1.0)
    with pytest.raises(DimensionError):
        GridFunction(g, np.zeros(4))
    with pytest.raises(InputError, match="node 2"):
        GridFunction(g, [0, 0, np.inf, 0, 0])
    u = GridFunction(g, np.arange(5.0))
    with pytest.raises(ValueError):
        u.values[0] = 3.0


def test_inner_zero():
    g = Grid(7, 0.3)
    z = GridFunction.zeros(g)
    assert inner(z, z) == 0.0


def test_inner_constant_one():
    g = Grid(10, 0.5)
    one = GridFunction.constant(g, 1.0)
    assert inner(one, one) == 5.0


def test_inner_matches_summation_oracle(rng):
    v = random_gf(rng, n=8)
    w = GridFunction(v.grid, rng.standard_normal(8))
    total = 0.0
    for a, b in zip(v.values.tolist(), w.values.tolist()):
        total += a * b
    assert inner(v, w) == pytest.approx(v.grid.dx * total, rel=1e-15)


def test_inner_grid_mismatch():
    a = GridFunction.zeros(Grid(6, 1.0))
    b = GridFunction.zeros(Grid(6, 0.5))
    with pytest.raises(DimensionError):
        inner(a, b)


def test_inner_symmetric_bilinear(rng):
    for _ in range(50):
        u = random_gf(rng)
        v = GridFunction(u.grid, rng.standard_normal(len(u)))
        w = GridFunction(u.grid, rng.standard_normal(len(u)))
        a, b = rng.standard_normal(2)
        assert inner(u, v) == pytest.approx(inner(v, u), rel=1e-14)
        lhs = inner(a * u + b * v, w)
        rhs = a * inner(u, w) + b * inner(v, w)
        scale = abs(a) * norm_l2(u) * norm_l2(w) + abs(b) * norm_l2(v) * norm_l2(w)
        assert abs(lhs - rhs) <= 1e-14 * scale


def test_norms_of_zero_and_spike():
    g = Grid(8, 0.25)
    z = GridFunction.zeros(g)
    assert (norm_l2(z), norm_inf(z)) == (0.0, 0.0)
    e0 = GridFunction(g, np.eye(8)[0])
    assert norm_l2(e0) == 0.5
    assert norm_inf(e0) == 1.0


@settings(max_examples=200, deadline=None)
@given(st.integers(5, 300), st.floats(1e-3, 10.0), st.integers(0, 2**32 - 1))
def test_inverse_inequality(n, dx, seed):
    v = GridFunction(Grid(n, dx), np.random.default_rng(seed).standard_normal(n))
    assert norm_inf(v) <= dx ** -0.5 * norm_l2(v) * (1 + 1e-14)


def test_h3_of_zero_and_constant():
    g = Grid.from_window(-3.0, 3.0, 60)
    assert norm_h3(GridFunction.zeros(g)) == 0.0
    c = GridFunction.constant(g, -2.5)
    assert norm_h3(c) == pytest.approx(2.5 * math.sqrt(6.0), rel=1e-14)


def _continuum_h3_gaussian():
    # quadrature oracle for ||u|| + ||u'|| + ||u''|| + ||u'''||, u = exp(-x^2)
    x = np.linspace(-12, 12, 200001)
    e = np.exp(-x * x)
    parts = (e, -2 * x * e, (4 * x * x - 2) * e, (12 * x - 8 * x**3) * e)
    return sum(math.sqrt(np.trapezoid(p * p, x)) for p in parts)


def test_h3_of_gaussian_bounded_under_refinement():
    limit = _continuum_h3_gaussian()
    values = []
    for n in (100, 200, 400, 800, 1600, 3200):
        g = Grid.from_window(-10.0, 10.0, n)
        values.append(norm_h3(GridFunction(g, np.exp(-g.x**2))))
    assert max(values) <= 1.05 * limit
    assert values[-1] == pytest.approx(limit, rel=1e-3)


# --- weighted norm and profile ---------------------------------------------

# c_R for R = 5 is attained by p on the plateau right of the support:
# 1 + 2R + 2 * int_0^1 S(s)^2 ds with S the quintic smoothstep; the integral
# is 181/462 exactly (polynomial integration in rationals below)
def _smoothstep_sq_integral():
    coeffs = {10: 36, 9: -180, 8: 345, 7: -300, 6: 100}
    return sum(Fraction(c, k + 1) for k, c in coeffs.items())


C_R_FIVE = 11.783549783549784


def test_c_r_oracle_is_the_frozen_constant():
    assert _smoothstep_sq_integral() == Fraction(181, 462)
    assert float(1 + 10 + 2 * _smoothstep_sq_integral()) == C_R_FIVE


def test_c_r_regression_R5():
    wp = build_weight(Grid.from_window(-10.0, 10.0, 2000), 5.0)
    assert wp.c_R == pytest.approx(C_R_FIVE, rel=1e-10)


@pytest.mark.parametrize("n,R", [(400, 5.0), (2000, 5.0), (257, 2.5), (1000, 3.0)])
def test_weight_invariants(n, R):
    g = Grid.from_window(-10.0, 10.0, n)
    wp = build_weight(g, R)
    x = g.x
    p, p1 = wp.p.values, wp.p1.values
    assert np.all(p >= 1.0) and np.all(p <= 3.0 + 2.0 * R)
    assert np.all(np.diff(p) >= 0)
    assert np.all(p1 >= 0)
    assert np.all(p1[np.abs(x) < R] == 1.0)
    assert np.all(p1[np.abs(x) >= R + 1] == 0.0)
    top = max(np.max(np.abs(a.values)) for a in (wp.p, wp.p1, wp.p2, wp.p3))
    assert wp.c_R >= top


def test_weight_examples():
    g = Grid.from_window(-10.0, 10.0, 20)
    wp = build_weight(g, 5.0)
    assert wp.p1.values[list(g.x).index(0.0)] == 1.0
    assert wp.p1.values[list(g.x).index(7.0)] == 0.0


def test_weight_derivatives_match_differences():
    # p1, p2, p3 are analytic; differencing p and p1 must agree to O(dx^2)
    g = Grid.from_window(-10.0, 10.0, 4000)
    wp = build_weight(g, 3.0)
    dx = g.dx
    cd = lambda a: (np.roll(a, -1) - np.roll(a, 1)) / (2 * dx)  # noqa: E731
    inner_ = slice(5, -5)
    assert np.max(np.abs(cd(wp.p.values) - wp.p1.values)[inner_]) < 1e-4
    assert np.max(np.abs(cd(wp.p1.values) - wp.p2.values)[inner_]) < 1e-3
    # omega''' jumps at |x| = R and R+1, so the last one is only O(dx) at those nodes
    assert np.max(np.abs(cd(wp.p2.values) - wp.p3.values)[inner_]) < 40 * dx


def test_omega_is_c2_and_monotone():
    x = np.linspace(5.0, 6.0, 10001)
    w, w1, w2 = omega_and_derivatives(x, 5.0)
    assert w[0] == 1.0 and w[-1] == 0.0
    assert np.all(np.diff(w) <= 0)
    assert abs(w1[0]) < 1e-12 and abs(w1[-1]) < 1e-12
    assert abs(w2[0]) < 1e-9 and abs(w2[-1]) < 1e-9


def test_weight_radius_too_large():
    with pytest.raises(ConfigurationError):
        build_weight(Grid.from_window(-5.0, 5.0, 100), 4.0)


def test_weighted_inner_oracle_and_bounds(rng):
    R = 3.0
    g = Grid.from_window(-5.0, 5.0, 50)
    wp = build_weight(g, R)
    for _ in range(100):
        v = GridFunction(g, rng.standard_normal(50))
        w = GridFunction(g, rng.standard_normal(50))
        direct = g.dx * sum(p * a * b for p, a, b in zip(wp.p.values, v.values, w.values))
        assert weighted_inner(v, w, wp) == pytest.approx(direct, rel=1e-13, abs=1e-14)
        assert norm_l2(v) <= norm_p(v, wp) <= math.sqrt(3 + 2 * R) * norm_l2(v)
    z = GridFunction.zeros(g)
    assert weighted_inner(z, z, wp) == 0.0


def test_weighted_inner_grid_mismatch():
    wp = build_weight(Grid.from_window(-5.0, 5.0, 50), 3.0)
    v = GridFunction.zeros(Grid.from_window(-5.0, 5.0, 40))
    with pytest.raises(DimensionError):
        norm_p(v, wp)


def test_determinism(rng):
    g = Grid.from_window(-10.0, 10.0, 300)
    v = GridFunction(g, rng.standard_normal(300))
    assert norm_h3(v) == norm_h3(GridFunction(g, v.values.copy()))
    a, b = build_weight(g, 5.0), build_weight(g, 5.0)
    assert np.array_equal(a.p.values, b.p.values) and a.c_R == b.c_R

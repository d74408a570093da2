import math

import numpy as np
import pytest

from kdvcn.diagnostics import (ConservationTracker, NormTracker, SmoothingAccumulator,
                               SmoothingObserver, conserved, rate, relative_error,
                               smoothing_update, track_h3, track_p)
from kdvcn.errors import DimensionError, DomainError
from kdvcn.lattice import Grid, GridFunction, build_weight, norm_l2
from kdvcn.reference import nonsmooth_l2, one_soliton, sample
from kdvcn.stepper import Regime, StepperConfig, evolve


def soliton(n=400, t=-1.0):
    return sample(lambda x: one_soliton(x, t), Grid.from_window(-10.0, 10.0, n))


def test_conserved_identity():
    u0 = soliton()
    rec = conserved(u0, u0)
    assert (rec.c1, rec.c2, rec.c3) == (1.0, 1.0, 1.0)


def test_conserved_zero_mean_not_applicable():
    g = Grid.from_window(0.0, 2 * math.pi, 64)
    u0 = sample(np.sin, g)
    rec = conserved(u0, u0)
    assert rec.c1 is None
    assert rec.c2 == 1.0


def test_conserved_zero_data_not_applicable():
    z = GridFunction.zeros(Grid(10, 0.1))
    rec = conserved(z, z)
    assert rec.c1 is None and rec.c2 is None and rec.c3 is None


def test_conserved_grid_mismatch():
    with pytest.raises(DimensionError):
        conserved(soliton(400), soliton(200))


def test_conserved_uses_forward_difference_energy():
    u0 = soliton(200)
    u = u0 * 1.1
    dx = u0.grid.dx
    e = lambda v: dx * np.sum(((np.roll(v, -1) - v) / dx) ** 2 - v**3 / 3)  # noqa: E731
    assert conserved(u, u0).c3 == pytest.approx(e(u.values) / e(u0.values), rel=1e-12)


def test_relative_error_examples():
    ref = soliton()
    assert relative_error(ref, ref) == 0.0
    assert relative_error(2 * ref, ref) == 1.0


def test_relative_error_nested():
    fine = soliton(800)
    coarse = soliton(200)
    assert relative_error(coarse, fine) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DimensionError):
        relative_error(soliton(300), fine)


def test_relative_error_scale_invariant(rng):
    ref = soliton()
    u = ref + GridFunction(ref.grid, 0.01 * rng.standard_normal(len(ref)))
    for a in (-3.0, 1e-5, 7.0):
        assert relative_error(a * u, a * ref) == pytest.approx(relative_error(u, ref), rel=1e-12)


def test_rate_examples():
    assert 1.958 <= rate(0.377, 8000, 0.097, 16000) < 1.959
    assert rate(0.5, 100, 0.5, 200) == 0.0
    assert rate(1.0, 100, 0.5, 200) == pytest.approx(1.0, rel=1e-15)


def test_rate_swap_invariance():
    # exchanging the two (E, N) pairs flips numerator and denominator together
    a = rate(0.3, 1000, 0.08, 2000)
    assert rate(0.08, 2000, 0.3, 1000) == pytest.approx(a, rel=1e-15)


def test_rate_errors():
    with pytest.raises(DomainError):
        rate(0.0, 10, 0.1, 20)
    with pytest.raises(DomainError):
        rate(0.1, 10, -0.1, 20)
    with pytest.raises(DomainError):
        rate(0.1, 10, 0.05, 10)


def test_smoothing_update_examples():
    g = Grid.from_window(-5.0, 5.0, 100)
    acc = SmoothingAccumulator(3.0)
    c = GridFunction.constant(g, 2.0)
    assert smoothing_update(acc, c, 0.1).total == 0.0
    u = sample(lambda x: np.sin(x), g)
    once = smoothing_update(acc, u, 0.01)
    twice = smoothing_update(once, u, 0.01)
    assert once.total > 0
    assert twice.total == pytest.approx(2 * once.total, rel=1e-15)


def test_smoothing_window_only():
    g = Grid.from_window(-5.0, 5.0, 100)
    u = sample(lambda x: np.where(np.abs(x) > 3.0, np.sin(5 * x), 0.0), g)
    # D+u_j touches x_{j+1}; with R - 1 = 2 the window ends well before |x| = 3
    assert smoothing_update(SmoothingAccumulator(3.0), u, 1.0).total == 0.0


def test_track_wrappers():
    g = Grid.from_window(-5.0, 5.0, 100)
    z = GridFunction.zeros(g)
    wp = build_weight(g, 3.0)
    assert track_h3(z) == 0.0 and track_p(z, wp) == 0.0
    u = sample(lambda x: np.exp(-x**2), g)
    assert norm_l2(u) <= track_p(u, wp) <= math.sqrt(9.0) * norm_l2(u)


def test_observers_over_a_rough_run():
    g = Grid.from_window(-5.0, 5.0, 200)
    u0 = sample(nonsmooth_l2, g)
    cfg = StepperConfig(regime=Regime.L2)
    wp = build_weight(g, 3.0)
    cons = ConservationTracker(u0)
    smooth = SmoothingObserver(SmoothingAccumulator(3.0))
    norms = NormTracker(wp, every=5)
    state, log = evolve(u0, 0.02, cfg, wp, observers=[cons, smooth, norms])
    assert len(cons.records) == len(log)
    assert cons.max_c2_drift() <= 10 * (cfg.fp_tol + cfg.lin_tol) * len(log)
    hist = np.array(smooth.history)
    assert np.all(np.diff(hist) >= 0)
    assert len(norms.h3) == len(log) // 5 and len(norms.p) == len(norms.h3)


def test_smoothing_additive_over_segments():
    g = Grid.from_window(-5.0, 5.0, 200)
    u0 = sample(nonsmooth_l2, g)
    cfg = StepperConfig(regime=Regime.L2)
    wp = build_weight(g, 3.0)
    dt = 2e-4
    whole = SmoothingObserver(SmoothingAccumulator(3.0))
    evolve(u0, 0.004, cfg, wp, observers=[whole], dt=dt)
    first = SmoothingObserver(SmoothingAccumulator(3.0))
    mid, _ = evolve(u0, 0.002, cfg, wp, observers=[first], dt=dt)
    second = SmoothingObserver(first.acc)
    evolve(mid.u, 0.004, cfg, wp, observers=[second], dt=dt, t_start=0.002)
    assert second.acc.total == pytest.approx(whole.acc.total, rel=1e-12)

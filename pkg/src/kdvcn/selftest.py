"""Randomised identity and conservation checks shared by the CLI and the tests.

Every check returns the largest relative defect it saw; a check passes when
that defect is at most the tolerance. Relative means: the defect divided by
the magnitude of the terms that enter the identity, so cancellation in an
identity that sums to zero does not make the test meaningless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .lattice import Grid, GridFunction
from .stepper import StepperConfig, cfl_dt, cn_step, RunState

TOL = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    defect: float
    tol: float
    informational: bool = False

    @property
    def passed(self) -> bool:
        return self.defect <= self.tol


def random_case(rng: np.random.Generator):
    """A random periodic grid size, spacing and pair of grid functions."""
    n = int(rng.integers(8, 513))
    dx = float(rng.uniform(0.01, 1.0))
    v = rng.standard_normal(n)
    w = rng.standard_normal(n)
    return n, dx, v, w


def _k():
    return kernels.impl


def _bar(v):
    return _k().bar_avg(v)


def _sp(v, k=1):
    return _k().shift(v, k)


# --- the individual identities; each returns (defect, scale) ---------------


def sbp_central(n, dx, v, w):
    k = _k()
    a = dx * k.dot(v, k.d_central(w, dx))
    b = dx * k.dot(k.d_central(v, dx), w)
    return abs(a + b), abs(a) + abs(b) + _l2(v, dx) * _l2(k.d_central(w, dx), dx)


def sbp_plus_minus(n, dx, v, w):
    k = _k()
    a = dx * k.dot(v, k.d_plus(w, dx))
    b = dx * k.dot(k.d_minus(v, dx), w)
    return abs(a + b), abs(a) + abs(b) + _l2(v, dx) * _l2(k.d_plus(w, dx), dx)


def product_central(n, dx, v, w):
    k = _k()
    lhs = k.d_central(v * w, dx)
    t1 = _bar(v) * k.d_central(w, dx)
    t2 = _bar(w) * k.d_central(v, dx)
    return _pointwise(lhs, t1, t2)


def product_plus(n, dx, v, w):
    k = _k()
    lhs = k.d_plus(v * w, dx)
    t1 = _sp(v, 1) * k.d_plus(w, dx)
    t2 = w * k.d_plus(v, dx)
    return _pointwise(lhs, t1, t2)


def product_minus(n, dx, v, w):
    k = _k()
    lhs = k.d_minus(v * w, dx)
    t1 = _sp(v, -1) * k.d_minus(w, dx)
    t2 = w * k.d_minus(v, dx)
    return _pointwise(lhs, t1, t2)


def dz1z2(n, dx, v, w):
    """<D(vw), w> = dx/2 <D+v Dw, w> + 1/2 <S-w Dv, w>."""
    k = _k()
    lhs = dx * k.dot(k.d_central(v * w, dx), w)
    r1 = 0.5 * dx * dx * k.dot(k.d_plus(v, dx) * k.d_central(w, dx), w)
    r2 = 0.5 * dx * k.dot(_sp(w, -1) * k.d_central(v, dx), w)
    scale = dx * k.dot(np.abs(k.d_central(v * w, dx)), np.abs(w)) + abs(r1) + abs(r2)
    return abs(lhs - r1 - r2), scale


def d3z1z2_displayed(n, dx, v, w):
    """D-DD+(vw) = D-v D+w + S-v D-DD+w + D+v D+w + D-DD+v Dw, pointwise (as displayed)."""
    k = _k()
    lhs = k.d3(v * w, dx)
    terms = (k.d_minus(v, dx) * k.d_plus(w, dx), _sp(v, -1) * k.d3(w, dx),
             k.d_plus(v, dx) * k.d_plus(w, dx), k.d3(v, dx) * k.d_central(w, dx))
    return _pointwise(lhs, *terms)


# products are kept as lists of (f, g) pairs so the three product rules can be
# applied symbolically and only multiplied out at the end


def _rule(pairs, op, dx):
    k = _k()
    out = []
    for f, g in pairs:
        if op == "plus":
            out += [(_sp(f, 1), k.d_plus(g, dx)), (g, k.d_plus(f, dx))]
        elif op == "minus":
            out += [(_sp(f, -1), k.d_minus(g, dx)), (g, k.d_minus(f, dx))]
        else:
            out += [(_bar(f), k.d_central(g, dx)), (_bar(g), k.d_central(f, dx))]
    return out


def d3_product_expansion(v, w, dx):
    """The eight products whose sum is D-DD+(vw), from the exact product rules."""
    pairs = _rule([(v, w)], "plus", dx)
    pairs = _rule(pairs, "central", dx)
    return _rule(pairs, "minus", dx)


def d3z1z2_expanded(n, dx, v, w):
    k = _k()
    lhs = k.d3(v * w, dx)
    terms = [f * g for f, g in d3_product_expansion(v, w, dx)]
    return _pointwise(lhs, *terms)


def g_skew(n, dx, v, w):
    k = _k()
    g = k.nonlinear_g(v, dx)
    return abs(dx * k.dot(g, v)), dx * k.dot(np.abs(g), np.abs(v))


def d3_skew(n, dx, v, w):
    k = _k()
    d = k.d3(v, dx)
    return abs(dx * k.dot(d, v)), dx * k.dot(np.abs(d), np.abs(v))


def _l2(v, dx):
    return math.sqrt(dx * float(np.dot(v, v)))


def _pointwise(lhs, *terms):
    total = np.zeros_like(lhs)
    scale = np.abs(lhs).copy()
    for t in terms:
        total = total + t
        scale = scale + np.abs(t)
    return float(np.max(np.abs(lhs - total))), float(np.max(scale))


IDENTITIES: dict[str, Callable] = {
    "summation by parts, D": sbp_central,
    "summation by parts, D+/D-": sbp_plus_minus,
    "product rule, D": product_central,
    "product rule, D+": product_plus,
    "product rule, D-": product_minus,
    "<D(vw), w> identity": dz1z2,
    "D-DD+(vw) by product rules": d3z1z2_expanded,
    "<G(u), u> = 0": g_skew,
    "<D-DD+u, u> = 0": d3_skew,
}

# a four-term pointwise formula for D-DD+(vw) that does not hold; kept so
# its failure is visible, never counted towards pass/fail of the suite
KNOWN_FALSE = {"D-DD+(vw) four-term formula": d3z1z2_displayed}


def check_identity(fn, samples: int = 1000, seed: int = 0, tol: float = TOL,
                   name: str = "", informational: bool = False) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        n, dx, v, w = random_case(rng)
        defect, scale = fn(n, dx, v, w)
        rel = defect / scale if scale > 0 else defect
        worst = max(worst, rel)
    return CheckResult(name or fn.__name__, worst, tol, informational)


def d3_composition_bitwise(samples: int = 1000, seed: int = 1) -> CheckResult:
    """The backend's d3 against an explicit d_minus(d_central(d_plus(.))) in numpy."""
    ref = kernels.numpy_impl
    rng = np.random.default_rng(seed)
    mismatches = 0
    for _ in range(samples):
        n, dx, v, _w = random_case(rng)
        got = kernels.impl.d3(v, dx)
        want = ref.d_minus(ref.d_central(ref.d_plus(v, dx), dx), dx)
        mismatches += int(not np.array_equal(got, want))
    return CheckResult("d3 equals its composition bit for bit", float(mismatches), 0.0)


def conservation_check(samples: int = 20, seed: int = 2) -> CheckResult:
    """One CN step of random smooth-ish data at the CFL step keeps the l2 norm."""
    rng = np.random.default_rng(seed)
    cfg = StepperConfig()
    worst = 0.0
    for _ in range(samples):
        n = int(rng.integers(32, 257))
        grid = Grid.from_window(-5.0, 5.0, n)
        # a few low Fourier modes keep the h3 norm, hence the CFL step, sensible
        x = grid.x
        u = sum(rng.standard_normal() * np.cos(m * np.pi * x / 5.0 + rng.uniform(0, 6.3))
                for m in range(4))
        u0 = GridFunction(grid, u)
        dt = cfl_dt(u0, cfg)
        _, stats = cn_step(RunState(u0), dt, cfg)
        worst = max(worst, abs(stats.l2_after - stats.l2_before) / stats.l2_before)
    return CheckResult("one CN step conserves the l2 norm", worst,
                       10.0 * (cfg.fp_tol + cfg.lin_tol))


def run_all(samples: int = 1000) -> list[CheckResult]:
    results = [check_identity(fn, samples, seed=i, name=name)
               for i, (name, fn) in enumerate(IDENTITIES.items())]
    results.append(d3_composition_bitwise(samples))
    results.append(conservation_check())
    for name, fn in KNOWN_FALSE.items():
        results.append(check_identity(fn, min(samples, 50), name=name, informational=True))
    return results

"""Pure-numpy kernels.

Every stencil is written as a composition of whole-array shifts so the
discrete identities (summation by parts, skew symmetry) hold to rounding.
The linear solve diagonalises the circulant operator with real FFTs.
"""

import math

import numpy as np


def shift(v, k):
    # (shift(v, k))_j = v_{j+k}, periodic
    return np.roll(v, -k)


def d_plus(v, dx):
    return (np.roll(v, -1) - v) / dx


def d_minus(v, dx):
    return (v - np.roll(v, 1)) / dx


def d_central(v, dx):
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * dx)


def d3(v, dx):
    return d_minus(d_central(d_plus(v, dx), dx), dx)


def tilde_avg(v):
    return (np.roll(v, -1) + v + np.roll(v, 1)) / 3.0


def bar_avg(v):
    return (np.roll(v, -1) + np.roll(v, 1)) / 2.0


def nonlinear_g(v, dx):
    return tilde_avg(v) * d_central(v, dx)


def dot(v, w):
    """Left-to-right sum of v*w (cumsum is strictly sequential)."""
    if v.size == 0:
        return 0.0
    return float(np.cumsum(v * w)[-1])


def d3_symbol(n, dx):
    """Eigenvalues of D-DD+ on the rfft modes of an n-periodic grid."""
    # rfft mode k picks up z = exp(i theta) under S+, so D+ -> (z-1)/dx,
    # D- -> (1-1/z)/dx, D -> i sin(theta)/dx
    theta = 2.0 * np.pi * np.arange(n // 2 + 1) / n
    return -1j * (2.0 - 2.0 * np.cos(theta)) * np.sin(theta) / dx**3


class FFTSolver:
    """Solves (I + dt/2 D-DD+) w = rhs by circulant diagonalisation."""

    kind = "fft"

    def __init__(self, n, dx, dt, lin_tol=1e-12):
        self.n = n
        self.dx = dx
        self.dt = dt
        self.lin_tol = lin_tol
        self._symbol = 1.0 + 0.5 * dt * d3_symbol(n, dx)

    def solve(self, rhs):
        return np.fft.irfft(np.fft.rfft(rhs) / self._symbol, n=self.n)


def apply_operator(w, dx, dt):
    return w + (0.5 * dt) * d3(w, dx)


def relative_residual(w, rhs, dx, dt):
    rr = dot(rhs, rhs)
    res = apply_operator(w, dx, dt) - rhs
    if rr == 0.0:
        return 0.0 if dot(res, res) == 0.0 else math.inf
    return math.sqrt(dot(res, res) / rr)


def cn_fixed_point(u, dt, dx, solver, fp_tol, fp_max_iter):
    """Fixed-point sweeps for one Crank-Nicolson step.

    Returns ``(w, iterations, last_increment, max_ratio, max_residual,
    converged)``. Increments are l2 norms (dx-weighted); ``max_ratio`` is the
    largest ||dw^l|| / ||dw^(l-1)|| for l >= 2 (0 when undefined).
    """
    base = u - (0.5 * dt) * d3(u, dx)
    w = u.copy()
    scale = max(math.sqrt(dx * dot(u, u)), np.finfo(float).eps)
    prev_inc = -1.0
    max_ratio = 0.0
    max_res = 0.0
    inc = 0.0
    for it in range(1, fp_max_iter + 1):
        rhs = base - dt * nonlinear_g(0.5 * (u + w), dx)
        w_new = solver.solve(rhs)
        max_res = max(max_res, relative_residual(w_new, rhs, dx, dt))
        diff = w_new - w
        inc = math.sqrt(dx * dot(diff, diff))
        if it >= 3 and prev_inc > 0.0:
            max_ratio = max(max_ratio, inc / prev_inc)
        prev_inc = inc
        w = w_new
        if inc <= fp_tol * scale:
            return w, it, inc, max_ratio, max_res, True
    return w, fp_max_iter, inc, max_ratio, max_res, False

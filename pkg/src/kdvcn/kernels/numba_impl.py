"""Numba kernels.

The stencils repeat the exact floating-point expression trees of the numpy
compositions, so both backends agree bit for bit on the operators. The
linear solve is a banded LU of the pentadiagonal part plus a rank-4
Woodbury correction for the periodic corners; the factorisation is built
once per (n, dx, dt).
"""

import math

import numpy as np
from numba import njit

_EPS = 2.220446049250313e-16


@njit(cache=True, error_model="numpy", inline="always")
def _wrap(j, n):
    if j < 0:
        return j + n
    if j >= n:
        return j - n
    return j


@njit(cache=True, error_model="numpy")
def shift(v, k):
    n = v.size
    out = np.empty_like(v)
    for j in range(n):
        out[j] = v[(j + k) % n]
    return out


@njit(cache=True, error_model="numpy")
def d_plus(v, dx):
    n = v.size
    out = np.empty_like(v)
    for j in range(n - 1):
        out[j] = (v[j + 1] - v[j]) / dx
    out[n - 1] = (v[0] - v[n - 1]) / dx
    return out


@njit(cache=True, error_model="numpy")
def d_minus(v, dx):
    n = v.size
    out = np.empty_like(v)
    out[0] = (v[0] - v[n - 1]) / dx
    for j in range(1, n):
        out[j] = (v[j] - v[j - 1]) / dx
    return out


@njit(cache=True, error_model="numpy")
def d_central(v, dx):
    n = v.size
    out = np.empty_like(v)
    for j in range(n):
        out[j] = (v[_wrap(j + 1, n)] - v[_wrap(j - 1, n)]) / (2.0 * dx)
    return out


@njit(cache=True, error_model="numpy")
def _d3_into(v, dx, out):
    # three sweeps with the same arithmetic as d_minus(d_central(d_plus(v)));
    # ``out`` doubles as scratch for the first one
    n = v.size
    h2 = 2.0 * dx
    p = out
    for j in range(n - 1):
        p[j] = (v[j + 1] - v[j]) / dx
    p[n - 1] = (v[0] - v[n - 1]) / dx
    c = np.empty(n)
    c[0] = (p[1] - p[n - 1]) / h2
    for j in range(1, n - 1):
        c[j] = (p[j + 1] - p[j - 1]) / h2
    c[n - 1] = (p[0] - p[n - 2]) / h2
    out[0] = (c[0] - c[n - 1]) / dx
    for j in range(1, n):
        out[j] = (c[j] - c[j - 1]) / dx


@njit(cache=True, error_model="numpy")
def d3(v, dx):
    out = np.empty_like(v)
    _d3_into(v, dx, out)
    return out


@njit(cache=True, error_model="numpy")
def tilde_avg(v):
    n = v.size
    out = np.empty_like(v)
    for j in range(n):
        out[j] = (v[_wrap(j + 1, n)] + v[j] + v[_wrap(j - 1, n)]) / 3.0
    return out


@njit(cache=True, error_model="numpy")
def bar_avg(v):
    n = v.size
    out = np.empty_like(v)
    for j in range(n):
        out[j] = (v[_wrap(j + 1, n)] + v[_wrap(j - 1, n)]) / 2.0
    return out


@njit(cache=True, error_model="numpy", inline="always")
def _g_at(a, c, b, h2):
    return ((a + c + b) / 3.0) * ((a - b) / h2)


@njit(cache=True, error_model="numpy")
def _g_into(v, dx, out):
    n = v.size
    h2 = 2.0 * dx
    out[0] = _g_at(v[1], v[0], v[n - 1], h2)
    for j in range(1, n - 1):
        out[j] = _g_at(v[j + 1], v[j], v[j - 1], h2)
    out[n - 1] = _g_at(v[0], v[n - 1], v[n - 2], h2)


@njit(cache=True, error_model="numpy")
def nonlinear_g(v, dx):
    out = np.empty_like(v)
    _g_into(v, dx, out)
    return out


@njit(cache=True, error_model="numpy")
def dot(v, w):
    s = 0.0
    for j in range(v.size):
        s += v[j] * w[j]
    return s


# --- cyclic pentadiagonal solve -------------------------------------------
#
# Row j of I + dt/2 D-DD+ has entries (-b, 2b, 1, -2b, b) at columns
# j-2..j+2 (mod n), b = dt / (4 dx^3). The band part has a positive definite
# symmetric part (the identity), so elimination without pivoting exists.


@njit(cache=True, error_model="numpy")
def band_factor(n, b):
    l1 = np.zeros(n)
    l2 = np.zeros(n)
    d = np.ones(n)
    e1 = np.full(n, 2.0 * b)
    f1 = np.full(n, -2.0 * b)
    for i in range(n):
        if i + 1 < n:
            m = e1[i + 1] / d[i]
            l1[i + 1] = m
            d[i + 1] -= m * f1[i]
            f1[i + 1] -= m * b
        if i + 2 < n:
            m = -b / d[i]
            l2[i + 2] = m
            e1[i + 2] -= m * f1[i]
            d[i + 2] -= m * b
    return l1, l2, 1.0 / d, f1


@njit(cache=True, error_model="numpy")
def band_solve(l1, l2, dinv, f1, b, rhs, out):
    n = rhs.size
    y1 = rhs[0]
    y0 = rhs[1] - l1[1] * y1
    out[0] = y1
    out[1] = y0
    for i in range(2, n):
        y = rhs[i] - l1[i] * y0 - l2[i] * y1
        out[i] = y
        y1 = y0
        y0 = y
    x1 = out[n - 1] * dinv[n - 1]
    out[n - 1] = x1
    x0 = (out[n - 2] - f1[n - 2] * x1) * dinv[n - 2]
    out[n - 2] = x0
    for i in range(n - 3, -1, -1):
        x = (out[i] - f1[i] * x0 - b * x1) * dinv[i]
        out[i] = x
        x1 = x0
        x0 = x


@njit(cache=True, error_model="numpy")
def _corner_apply(y, b, n):
    # rows 0, 1, n-2, n-1 of the wraparound part applied to y
    c = np.empty(4)
    c[0] = -b * y[n - 2] + 2.0 * b * y[n - 1]
    c[1] = -b * y[n - 1]
    c[2] = b * y[0]
    c[3] = -2.0 * b * y[0] + b * y[1]
    return c


@njit(cache=True, error_model="numpy")
def woodbury_columns(l1, l2, dinv, f1, b, n):
    z = np.empty((n, 4))
    col = np.empty(n)
    e = np.zeros(n)
    rows = (0, 1, n - 2, n - 1)
    cap = np.eye(4)
    for k in range(4):
        e[:] = 0.0
        e[rows[k]] = 1.0
        band_solve(l1, l2, dinv, f1, b, e, col)
        z[:, k] = col
        c = _corner_apply(col, b, n)
        for r in range(4):
            cap[r, k] += c[r]
    # The columns decay geometrically away from the corners. Entries below
    # 1e-30 of the peak are dropped: they cannot change a double-precision
    # result and would otherwise be subnormal, which is very slow to multiply.
    cut = 1e-30 * np.max(np.abs(z))
    head = 0
    tail = n
    for j in range(n):
        keep = False
        for k in range(4):
            if abs(z[j, k]) > cut:
                keep = True
            else:
                z[j, k] = 0.0
        if keep:
            if j < n // 2:
                head = j + 1
            elif tail == n:
                tail = j
    return z, cap, head, tail


@njit(cache=True, error_model="numpy")
def _cyclic_solve(l1, l2, dinv, f1, b, z, head, tail, capinv, rhs, out):
    n = rhs.size
    band_solve(l1, l2, dinv, f1, b, rhs, out)
    c = _corner_apply(out, b, n)
    k0 = capinv[0, 0] * c[0] + capinv[0, 1] * c[1] + capinv[0, 2] * c[2] + capinv[0, 3] * c[3]
    k1 = capinv[1, 0] * c[0] + capinv[1, 1] * c[1] + capinv[1, 2] * c[2] + capinv[1, 3] * c[3]
    k2 = capinv[2, 0] * c[0] + capinv[2, 1] * c[1] + capinv[2, 2] * c[2] + capinv[2, 3] * c[3]
    k3 = capinv[3, 0] * c[0] + capinv[3, 1] * c[1] + capinv[3, 2] * c[2] + capinv[3, 3] * c[3]
    for j in range(head):
        out[j] -= k0 * z[j, 0] + k1 * z[j, 1] + k2 * z[j, 2] + k3 * z[j, 3]
    for j in range(tail, n):
        out[j] -= k0 * z[j, 0] + k1 * z[j, 1] + k2 * z[j, 2] + k3 * z[j, 3]


@njit(cache=True, error_model="numpy")
def _residual(w, rhs, dx, dt, work):
    """Relative l2 residual of (I + dt/2 D-DD+) w = rhs; ``work`` gets r."""
    n = w.size
    _d3_into(w, dx, work)
    rr = 0.0
    res2 = 0.0
    for j in range(n):
        r = (w[j] + (0.5 * dt) * work[j]) - rhs[j]
        work[j] = r
        res2 += r * r
        rr += rhs[j] * rhs[j]
    if rr > 0.0:
        return math.sqrt(res2 / rr)
    if res2 == 0.0:
        return 0.0
    return math.inf


@njit(cache=True, error_model="numpy")
def _solve_refined(l1, l2, dinv, f1, b, z, head, tail, capinv, dx, dt, lin_tol, rhs, out, work, corr):
    # one solve plus up to two rounds of iterative refinement
    _cyclic_solve(l1, l2, dinv, f1, b, z, head, tail, capinv, rhs, out)
    res = _residual(out, rhs, dx, dt, work)
    for _ in range(2):
        if res <= lin_tol:
            break
        _cyclic_solve(l1, l2, dinv, f1, b, z, head, tail, capinv, work, corr)
        for j in range(out.size):
            out[j] -= corr[j]
        res = _residual(out, rhs, dx, dt, work)
    return res


class BandedSolver:
    """Solves (I + dt/2 D-DD+) w = rhs by cyclic banded elimination."""

    kind = "banded"

    def __init__(self, n, dx, dt, lin_tol=1e-12):
        self.n = n
        self.dx = dx
        self.dt = dt
        self.lin_tol = lin_tol
        self.b = dt / (4.0 * dx**3)
        self.l1, self.l2, self.dinv, self.f1 = band_factor(n, self.b)
        self.z, cap, self.head, self.tail = woodbury_columns(self.l1, self.l2, self.dinv, self.f1, self.b, n)
        self.capinv = np.linalg.inv(cap)
        self._work = np.empty(n)
        self._corr = np.empty(n)

    def solve(self, rhs):
        out = np.empty_like(rhs)
        _solve_refined(self.l1, self.l2, self.dinv, self.f1, self.b, self.z, self.head,
                       self.tail, self.capinv,
                       self.dx, self.dt, self.lin_tol, rhs, out, self._work, self._corr)
        return out


@njit(cache=True, error_model="numpy")
def _fixed_point(u, dt, dx, l1, l2, dinv, f1, b, z, head, tail, capinv, lin_tol, fp_tol, fp_max_iter):
    n = u.size
    base = np.empty(n)
    _d3_into(u, dx, base)
    for j in range(n):
        base[j] = u[j] - (0.5 * dt) * base[j]
    w = u.copy()
    half = np.empty(n)
    rhs = np.empty(n)
    w_new = np.empty(n)
    work = np.empty(n)
    corr = np.empty(n)
    scale = max(math.sqrt(dx * dot(u, u)), _EPS)
    prev_inc = -1.0
    max_ratio = 0.0
    max_res = 0.0
    inc = 0.0
    for it in range(1, fp_max_iter + 1):
        for j in range(n):
            half[j] = 0.5 * (u[j] + w[j])
        _g_into(half, dx, rhs)
        for j in range(n):
            rhs[j] = base[j] - dt * rhs[j]
        res = _solve_refined(l1, l2, dinv, f1, b, z, head, tail, capinv, dx, dt, lin_tol,
                             rhs, w_new, work, corr)
        if res > max_res:
            max_res = res
        s = 0.0
        for j in range(n):
            dj = w_new[j] - w[j]
            s += dj * dj
        inc = math.sqrt(dx * s)
        if it >= 3 and prev_inc > 0.0:
            ratio = inc / prev_inc
            if ratio > max_ratio:
                max_ratio = ratio
        prev_inc = inc
        w, w_new = w_new, w
        if inc <= fp_tol * scale:
            return w, it, inc, max_ratio, max_res, True
    return w, fp_max_iter, inc, max_ratio, max_res, False


def cn_fixed_point(u, dt, dx, solver, fp_tol, fp_max_iter):
    """Same contract as the numpy version; needs a :class:`BandedSolver`."""
    return _fixed_point(u, dt, dx, solver.l1, solver.l2, solver.dinv, solver.f1,
                        solver.b, solver.z, solver.head, solver.tail, solver.capinv,
                        solver.lin_tol,
                        fp_tol, fp_max_iter)


def apply_operator(w, dx, dt):
    return w + (0.5 * dt) * d3(w, dx)


def relative_residual(w, rhs, dx, dt):
    return _residual(w, rhs, dx, dt, np.empty_like(w))

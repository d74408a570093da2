"""Exact KdV solutions, the rough L2 datum, grid sampling and cached fine-grid references."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import warnings
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import filelock
import numpy as np

from . import kernels
from .errors import ConfigurationError, InputError
from .lattice import Grid, GridFunction, build_weight
from .snapshots import read_snapshot, write_snapshot
from .stepper import Regime, StepperConfig, cfl_ratio, evolve

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolitonParams:
    """Two-soliton parameters; the solitons travel at speeds 2a and 2b."""

    a: float = 0.5
    b: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.a < self.b:
            raise ConfigurationError(f"need 0 < a < b, got a={self.a}, b={self.b}")


def one_soliton(x, t):
    """9 sech^2(sqrt(3)/2 (x - 3t)), a single bump moving right at speed 3."""
    th = np.tanh(0.5 * math.sqrt(3.0) * (np.asarray(x, dtype=float) - 3.0 * t))
    return 9.0 * (1.0 - th * th)


def _sech2(z):
    e = np.exp(-2.0 * np.abs(z))
    return 4.0 * e / (1.0 + e) ** 2


def _csch2(z):
    e = np.exp(-np.abs(z))
    return (2.0 * e / -np.expm1(-2.0 * np.abs(z))) ** 2


# below this |Y| the csch/coth form is replaced by its sinh^2-multiplied version
REGULAR_BAND = 1e-6


def two_soliton(x, t, p: SolitonParams = SolitonParams()):
    """Two-soliton solution with the removable singularity at x = 2bt handled.

    With X = sqrt(a/2)(x - 2at), Y = sqrt(b/2)(x - 2bt):

        w = 6(b-a) [b csch^2 Y + a sech^2 X] / [sqrt(a) tanh X - sqrt(b) coth Y]^2

    Multiplying through by sinh^2 Y gives a form free of singular terms,
    used for |Y| < REGULAR_BAND.
    """
    a, b = p.a, p.b
    x = np.asarray(x, dtype=float)
    X = math.sqrt(a / 2.0) * (x - 2.0 * a * t)
    Y = math.sqrt(b / 2.0) * (x - 2.0 * b * t)
    near = np.abs(Y) < REGULAR_BAND
    Yd = np.where(near, 1.0, Y)
    num = b * _csch2(Yd) + a * _sech2(X)
    den = (math.sqrt(a) * np.tanh(X) - math.sqrt(b) / np.tanh(Yd)) ** 2
    direct = 6.0 * (b - a) * num / den
    if not np.any(near):
        return direct
    sy, cy = np.sinh(Y), np.cosh(Y)
    num_r = b + a * _sech2(X) * sy * sy
    den_r = (math.sqrt(a) * np.tanh(X) * sy - math.sqrt(b) * cy) ** 2
    return np.where(near, 6.0 * (b - a) * num_r / den_r, direct)


def nonsmooth_l2(x):
    """(x+1)/2 on [-1, 1], zero elsewhere in the cell [-5, 5)."""
    x = np.asarray(x, dtype=float)
    return np.where((x >= -1.0) & (x <= 1.0), 0.5 * (x + 1.0), 0.0)


def sample(f: Callable, grid: Grid) -> GridFunction:
    """values[j] = f(x_left + j dx)."""
    vals = np.asarray(f(grid.x), dtype=float)
    if vals.shape != (grid.n_cells,):
        vals = np.broadcast_to(vals, (grid.n_cells,)).copy()
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        j = int(bad[0])
        raise InputError(f"non-finite sample {vals[j]} at node {j} (x={grid.x[j]!r})")
    return GridFunction(grid, vals)


# --- built-in cases -------------------------------------------------------


@dataclass(frozen=True)
class CaseDefaults:
    window: tuple
    t_start: float
    t_end: float
    regime: Regime
    weight_radius: float
    has_exact: bool


CASES = {
    "one_soliton": CaseDefaults((-10.0, 10.0), -1.0, 1.0, Regime.H3, 5.0, True),
    "two_soliton": CaseDefaults((-40.0, 40.0), -10.0, 10.0, Regime.H3, 5.0, True),
    "nonsmooth_l2": CaseDefaults((-5.0, 5.0), 0.0, 0.5, Regime.L2, 3.0, False),
}


def canonical_case(name: str) -> str:
    key = name.replace("-", "_")
    if key not in CASES:
        raise ConfigurationError(f"unknown case {name!r}; expected one of {sorted(CASES)}")
    return key


def exact_solution(case: str, grid: Grid, t: float,
                   params: Optional[SolitonParams] = None) -> GridFunction:
    case = canonical_case(case)
    if case == "one_soliton":
        return sample(lambda x: one_soliton(x, t), grid)
    if case == "two_soliton":
        return sample(lambda x: two_soliton(x, t, params or SolitonParams()), grid)
    raise ConfigurationError(f"case {case!r} has no closed-form solution")


def initial_datum(case: str, grid: Grid, t_start: Optional[float] = None,
                  params: Optional[SolitonParams] = None) -> GridFunction:
    case = canonical_case(case)
    if case == "nonsmooth_l2":
        lo, hi = CASES[case].window
        period = hi - lo
        return sample(lambda x: nonsmooth_l2((x - lo) % period + lo), grid)
    t0 = CASES[case].t_start if t_start is None else t_start
    return exact_solution(case, grid, t0, params)


def step_exponent(regime: Regime) -> float:
    """dt = lambda * dx**alpha, alpha = 1 (H3) or 3/2 (L2)."""
    return 1.0 if Regime(regime) is Regime.H3 else 1.5


def frozen_ratio(u0: GridFunction, cfg: StepperConfig, weight_radius: float) -> float:
    """lambda_0 from the CFL law evaluated on the initial datum."""
    wp = build_weight(u0.grid, weight_radius) if cfg.regime is Regime.L2 else None
    return cfl_ratio(u0, cfg, wp)


# --- fine-grid references -------------------------------------------------


def cache_root() -> str:
    env = os.environ.get("KDVCN_CACHE")
    if env:
        return env
    return os.path.join(os.path.expanduser("~"), ".cache", "kdvcn")


def _key(case, n_fine, window, t_start, t_end, cfg, step_ratio, weight_radius, params,
         initial_hash) -> dict:
    c = asdict(cfg)
    c["regime"] = cfg.regime.value
    return {
        "case": case, "n_fine": int(n_fine), "window": [float(window[0]), float(window[1])],
        "t_start": float(t_start), "t_end": float(t_end), "stepper": c,
        "step_ratio": None if step_ratio is None else float(step_ratio),
        "weight_radius": float(weight_radius),
        "params": None if params is None else asdict(params),
        "initial": initial_hash, "backend": kernels.BACKEND,
    }


def config_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def reference_path(case: str, n_fine: int, t_end: float, cfg_hash: str,
                   cache_dir: Optional[str] = None) -> str:
    root = cache_dir or cache_root()
    return os.path.join(root, case, f"{int(n_fine)}_{format(float(t_end), '.17g')}_{cfg_hash}.csv")


def make_reference(case: str, n_fine: int, t_end: Optional[float] = None,
                   cfg: Optional[StepperConfig] = None, *, window=None,
                   t_start: Optional[float] = None, step_ratio: Optional[float] = None,
                   weight_radius: Optional[float] = None,
                   params: Optional[SolitonParams] = None,
                   initial: Optional[GridFunction] = None,
                   cache_dir: Optional[str] = None, use_cache: bool = True) -> GridFunction:
    """Evolve the case's datum on an ``n_fine`` grid to ``t_end`` and cache the result.

    ``step_ratio`` fixes dt = step_ratio * dx**alpha (see :func:`step_exponent`);
    ``None`` re-applies the CFL law every step. ``initial`` overrides the
    built-in datum (it must live on the fine grid). A cached file that fails
    to parse is recomputed with a warning.
    """
    name = case if initial is not None and case not in CASES else canonical_case(case)
    dflt = CASES.get(name)
    if dflt is None and window is None and initial is None:
        raise ConfigurationError(f"case {case!r} needs a window and an initial datum")
    if window is None:
        window = dflt.window if initial is None else (initial.grid.x_left, initial.grid.x_right)
    window = tuple(window)
    t_start = t_start if t_start is not None else (dflt.t_start if dflt else 0.0)
    t_end = t_end if t_end is not None else dflt.t_end
    cfg = cfg or StepperConfig(regime=dflt.regime if dflt else Regime.H3)
    weight_radius = weight_radius if weight_radius is not None else (
        dflt.weight_radius if dflt else 3.0)
    grid = Grid.from_window(window[0], window[1], n_fine)
    if initial is not None:
        if initial.grid != grid:
            raise ConfigurationError("initial datum does not live on the fine grid")
        u0 = initial
        init_hash = hashlib.sha256(u0.values.tobytes()).hexdigest()[:16]
    else:
        u0 = initial_datum(name, grid, t_start, params)
        init_hash = None

    key = _key(name, n_fine, window, t_start, t_end, cfg, step_ratio, weight_radius,
               params, init_hash)
    h = config_hash(key)
    path = reference_path(name, n_fine, t_end, h, cache_dir)

    def load():
        if not os.path.exists(path):
            return None
        try:
            u, meta = read_snapshot(path)
            if u.grid.n_cells != n_fine or meta.get("config_hash") != h:
                raise InputError("cache entry does not match its key")
            return GridFunction(grid, u.values)
        except (InputError, ValueError, OSError) as exc:
            warnings.warn(f"discarding corrupt reference cache {path}: {exc}", RuntimeWarning)
            return None

    if use_cache:
        got = load()
        if got is not None:
            return got
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with filelock.FileLock(path + ".lock"):
            got = load()
            if got is not None:
                return got
            u = _compute(u0, t_start, t_end, cfg, step_ratio, weight_radius)
            write_snapshot(path, u, {"case": name, "t": format(float(t_end), ".17g"),
                                     "config_hash": h})
            log.info("wrote reference %s", path)
            return u
    return _compute(u0, t_start, t_end, cfg, step_ratio, weight_radius)


def _compute(u0, t_start, t_end, cfg, step_ratio, weight_radius) -> GridFunction:
    wp = build_weight(u0.grid, weight_radius) if cfg.regime is Regime.L2 else None
    dt = None
    if step_ratio is not None:
        dt = step_ratio * u0.grid.dx ** step_exponent(cfg.regime)
        if wp is not None:
            dt = min(dt, 1.0 / (4.0 * wp.c_R))
    state, _ = evolve(u0, t_end, cfg, wp, dt=dt, t_start=t_start)
    return state.u

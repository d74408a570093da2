"""Experiment configs, convergence studies and report files."""

from __future__ import annotations

import configparser
import io
import logging
import math
import multiprocessing
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import kernels
from .diagnostics import conserved, rate, relative_error, restrict
from .errors import ConfigurationError, KdvError
from .lattice import Grid, GridFunction, build_weight
from .reference import (CASES, SolitonParams, config_hash, exact_solution, frozen_ratio,
                        initial_datum, make_reference, step_exponent)
from .snapshots import read_snapshot
from .stepper import Regime, StepperConfig, evolve

log = logging.getLogger(__name__)

CSV_HEADER = "N,E,C1,C2,C3,R_E"
CASE_NAMES = ("one_soliton", "two_soliton", "nonsmooth_l2", "custom_file")


@dataclass(frozen=True)
class ExperimentSpec:
    case: str
    domain: tuple
    n_list: tuple
    t_start: float
    t_end: float
    stepper: StepperConfig = StepperConfig()
    weight_radius: float = 5.0
    soliton_params: Optional[SolitonParams] = None
    # "exact" or "fine_grid"; n_fine only for the latter
    reference: str = "exact"
    n_fine: Optional[int] = None
    # "frozen": dt = lambda0 dx^alpha, lambda0 from the datum on the coarsest grid;
    # "adaptive": CFL law re-applied every step
    step_policy: str = "frozen"
    step_ratio: Optional[float] = None
    initial_file: Optional[str] = None
    output_path: str = ""

    def __post_init__(self):
        case = self.case.replace("-", "_")
        if case not in CASE_NAMES:
            raise ConfigurationError(f"unknown case {self.case!r}")
        object.__setattr__(self, "case", case)
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if len(self.domain) != 2 or not self.domain[1] > self.domain[0]:
            raise ConfigurationError(f"bad domain {self.domain}")
        if not self.n_list or any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ConfigurationError(f"n_list must be non-empty and strictly increasing: {self.n_list}")
        if not self.t_end > self.t_start:
            raise ConfigurationError(f"t_end={self.t_end} must exceed t_start={self.t_start}")
        if self.reference not in ("exact", "fine_grid"):
            raise ConfigurationError(f"reference must be exact or fine_grid, got {self.reference!r}")
        if self.reference == "fine_grid":
            if self.n_fine is None or any(self.n_fine % n for n in self.n_list):
                raise ConfigurationError(
                    f"n_fine={self.n_fine} must be a multiple of every N in {self.n_list}")
        elif case in ("nonsmooth_l2", "custom_file"):
            raise ConfigurationError(f"case {case} has no exact solution; use fine_grid")
        if self.step_policy not in ("frozen", "adaptive"):
            raise ConfigurationError(f"step_policy must be frozen or adaptive, got {self.step_policy!r}")
        if case == "custom_file" and not self.initial_file:
            raise ConfigurationError("custom_file needs initial_file")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def default_spec(case: str, n_list, **overrides) -> ExperimentSpec:
    """Spec for a built-in case with its standard window, times and regime."""
    case = case.replace("-", "_")
    d = CASES[case]
    base = dict(case=case, domain=d.window, n_list=tuple(n_list), t_start=d.t_start,
                t_end=d.t_end, stepper=StepperConfig(regime=d.regime),
                weight_radius=d.weight_radius,
                soliton_params=SolitonParams() if case == "two_soliton" else None,
                reference="exact" if d.has_exact else "fine_grid")
    base.update(overrides)
    return ExperimentSpec(**base)


# --- config files ---------------------------------------------------------

_EXPERIMENT_KEYS = {"case", "domain", "n_list", "t_start", "t_end", "weight_radius",
                    "soliton_a", "soliton_b", "output", "initial_file"}
_STEPPER_KEYS = {"L", "regime", "fp_tol", "fp_max_iter", "lin_tol", "dt_cap",
                 "step_policy", "step_ratio"}
_REFERENCE_KEYS = {"kind", "n_fine"}
_SECTIONS = {"experiment": _EXPERIMENT_KEYS, "stepper": _STEPPER_KEYS,
             "reference": _REFERENCE_KEYS}


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#",),
                                  inline_comment_prefixes=("#",), interpolation=None,
                                  strict=True)
    p.optionxform = str  # keep "L" upper case
    return p


def _num(section, key, raw, kind=float):
    try:
        v = kind(raw)
    except ValueError:
        raise ConfigurationError(f"[{section}] {key}: not a number: {raw!r}") from None
    if kind is float and not math.isfinite(v):
        raise ConfigurationError(f"[{section}] {key}: must be finite")
    return v


def _int(section, key, raw):
    v = _num(section, key, raw, float)
    if v != int(v):
        raise ConfigurationError(f"[{section}] {key}: expected an integer, got {raw!r}")
    return int(v)


def parse_config(text: str) -> ExperimentSpec:
    p = _parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"config syntax: {exc}") from None
    for sec in p.sections():
        if sec not in _SECTIONS:
            raise ConfigurationError(f"unknown section [{sec}]")
        extra = set(p[sec]) - _SECTIONS[sec]
        if extra:
            raise ConfigurationError(f"unknown key(s) in [{sec}]: {', '.join(sorted(extra))}")
    if "experiment" not in p:
        raise ConfigurationError("missing [experiment] section")
    ex = p["experiment"]
    if "case" not in ex:
        raise ConfigurationError("[experiment] case is required")
    case = ex["case"].strip().replace("-", "_")
    defaults = CASES.get(case)
    kw: dict = {"case": case}

    def get(key, default=None):
        return ex.get(key, default)

    if "domain" in ex:
        parts = [s for s in ex["domain"].split(",") if s.strip()]
        if len(parts) != 2:
            raise ConfigurationError("[experiment] domain: expected 'left, right'")
        kw["domain"] = tuple(_num("experiment", "domain", s) for s in parts)
    elif defaults:
        kw["domain"] = defaults.window
    else:
        raise ConfigurationError("[experiment] domain is required for this case")
    if "n_list" not in ex:
        raise ConfigurationError("[experiment] n_list is required")
    kw["n_list"] = tuple(_int("experiment", "n_list", s) for s in ex["n_list"].split(",")
                         if s.strip())
    for key in ("t_start", "t_end", "weight_radius"):
        if key in ex:
            kw[key] = _num("experiment", key, get(key))
        elif defaults:
            kw[key] = getattr(defaults, key)
        elif key == "t_start":
            kw[key] = 0.0
        elif key == "weight_radius":
            kw[key] = 3.0
        else:
            raise ConfigurationError(f"[experiment] {key} is required")
    if "soliton_a" in ex or "soliton_b" in ex or case == "two_soliton":
        kw["soliton_params"] = SolitonParams(
            _num("experiment", "soliton_a", get("soliton_a", "0.5")),
            _num("experiment", "soliton_b", get("soliton_b", "1")))
    if "initial_file" in ex:
        kw["initial_file"] = ex["initial_file"].strip()
    kw["output_path"] = get("output", "").strip()

    st = p["stepper"] if "stepper" in p else {}
    s_kw = {}
    if "L" in st:
        s_kw["L"] = _num("stepper", "L", st["L"])
    if "regime" in st:
        try:
            s_kw["regime"] = Regime(st["regime"].strip().upper())
        except ValueError:
            raise ConfigurationError(f"[stepper] regime must be H3 or L2, got {st['regime']!r}") from None
    elif defaults:
        s_kw["regime"] = defaults.regime
    for key in ("fp_tol", "lin_tol", "dt_cap"):
        if key in st:
            s_kw[key] = _num("stepper", key, st[key])
    if "fp_max_iter" in st:
        s_kw["fp_max_iter"] = _int("stepper", "fp_max_iter", st["fp_max_iter"])
    kw["stepper"] = StepperConfig(**s_kw)
    if "step_policy" in st:
        kw["step_policy"] = st["step_policy"].strip()
    if "step_ratio" in st:
        kw["step_ratio"] = _num("stepper", "step_ratio", st["step_ratio"])

    rf = p["reference"] if "reference" in p else {}
    kind = rf.get("kind", "exact" if defaults and defaults.has_exact else "fine_grid").strip()
    kw["reference"] = kind
    if "n_fine" in rf:
        kw["n_fine"] = _int("reference", "n_fine", rf["n_fine"])
    return ExperimentSpec(**kw)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_config(spec: ExperimentSpec) -> str:
    """Canonical text of ``spec``; parse_config(emit_config(s)) == s."""
    out = io.StringIO()
    w = out.write
    w("[experiment]\n")
    w(f"case = {spec.case}\n")
    w(f"domain = {_fmt(spec.domain[0])}, {_fmt(spec.domain[1])}\n")
    w(f"n_list = {', '.join(str(n) for n in spec.n_list)}\n")
    w(f"t_start = {_fmt(spec.t_start)}\n")
    w(f"t_end = {_fmt(spec.t_end)}\n")
    w(f"weight_radius = {_fmt(spec.weight_radius)}\n")
    if spec.soliton_params is not None:
        w(f"soliton_a = {_fmt(spec.soliton_params.a)}\n")
        w(f"soliton_b = {_fmt(spec.soliton_params.b)}\n")
    if spec.initial_file:
        w(f"initial_file = {spec.initial_file}\n")
    if spec.output_path:
        w(f"output = {spec.output_path}\n")
    s = spec.stepper
    w("\n[stepper]\n")
    w(f"L = {_fmt(s.L)}\n")
    w(f"regime = {s.regime.value}\n")
    w(f"fp_tol = {_fmt(s.fp_tol)}\n")
    w(f"fp_max_iter = {s.fp_max_iter}\n")
    w(f"lin_tol = {_fmt(s.lin_tol)}\n")
    if s.dt_cap is not None:
        w(f"dt_cap = {_fmt(s.dt_cap)}\n")
    w(f"step_policy = {spec.step_policy}\n")
    if spec.step_ratio is not None:
        w(f"step_ratio = {_fmt(spec.step_ratio)}\n")
    w("\n[reference]\n")
    w(f"kind = {spec.reference}\n")
    if spec.n_fine is not None:
        w(f"n_fine = {spec.n_fine}\n")
    return out.getvalue()


def load_config(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def spec_hash(spec: ExperimentSpec) -> str:
    return config_hash(emit_config(replace(spec, output_path="")))


# --- the study ------------------------------------------------------------


@dataclass(frozen=True)
class ReportRow:
    N: int
    E: float
    c1: Optional[float]
    c2: Optional[float]
    c3: Optional[float]
    rate: Optional[float] = None
    steps: int = 0
    max_fp_iterations: int = 0
    max_increment_ratio: float = 0.0
    max_c2_drift: float = 0.0


@dataclass
class ErrorReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]


def _initial(spec: ExperimentSpec, grid: Grid) -> GridFunction:
    if spec.case == "custom_file":
        u, _ = read_snapshot(spec.initial_file)
        if u.grid.n_cells == grid.n_cells:
            return GridFunction(grid, u.values)
        return restrict(u, grid)
    return initial_datum(spec.case, grid, spec.t_start, spec.soliton_params)


def _grid(spec: ExperimentSpec, n: int) -> Grid:
    return Grid.from_window(spec.domain[0], spec.domain[1], n)


def resolve_step_ratio(spec: ExperimentSpec) -> Optional[float]:
    """lambda0 for the frozen policy: explicit, else from the datum on the coarsest grid."""
    if spec.step_policy == "adaptive":
        return None
    if spec.step_ratio is not None:
        return spec.step_ratio
    u0 = _initial(spec, _grid(spec, spec.n_list[0]))
    return frozen_ratio(u0, spec.stepper, spec.weight_radius)


def _reference_for(spec: ExperimentSpec, lam: Optional[float]) -> Optional[GridFunction]:
    if spec.reference == "exact":
        return None
    initial = None
    if spec.case == "custom_file":
        initial = _initial(spec, _grid(spec, spec.n_fine))
    return make_reference(spec.case, spec.n_fine, spec.t_end, spec.stepper, window=spec.domain,
                          t_start=spec.t_start, step_ratio=lam,
                          weight_radius=spec.weight_radius, params=spec.soliton_params,
                          initial=initial)


def run_row(spec: ExperimentSpec, n: int, lam: Optional[float],
            ref: Optional[GridFunction]) -> ReportRow:
    """Evolve one grid size and measure it against the reference."""
    grid = _grid(spec, n)
    u0 = _initial(spec, grid)
    cfg = spec.stepper
    wp = build_weight(grid, spec.weight_radius) if cfg.regime is Regime.L2 else None
    dt = None
    if lam is not None:
        dt = lam * grid.dx ** step_exponent(cfg.regime)
        if wp is not None:
            dt = min(dt, 1.0 / (4.0 * wp.c_R))
    state, runlog = evolve(u0, spec.t_end, cfg, wp, dt=dt, t_start=spec.t_start)
    target = (exact_solution(spec.case, grid, spec.t_end, spec.soliton_params)
              if ref is None else restrict(ref, grid))
    e = relative_error(state.u, target)
    rec = conserved(state.u, u0, state.t)
    l2 = runlog["l2_after"]
    l0 = runlog["l2_before"][0] if len(runlog) else 1.0
    drift = float(np.max(np.abs(l2 / l0 - 1.0))) if len(runlog) and l0 > 0 else 0.0
    return ReportRow(n, e, rec.c1, rec.c2, rec.c3, None, len(runlog),
                     int(np.max(runlog["fp_iterations"])) if len(runlog) else 0,
                     float(np.max(runlog["max_increment_ratio"])) if len(runlog) else 0.0,
                     drift)


def _row_job(args):
    spec, n, lam, ref = args
    try:
        return n, run_row(spec, n, lam, ref), None
    except KdvError as exc:
        return n, None, f"{type(exc).__name__}: {exc}"


def fill_rates(rows: list) -> list:
    """Rate from each row to the next; the last row has none."""
    out = []
    for i, r in enumerate(rows):
        rt = None
        if i + 1 < len(rows):
            nxt = rows[i + 1]
            rt = rate(r.E, r.N, nxt.E, nxt.N) if r.E > 0 and nxt.E > 0 else None
        out.append(replace(r, rate=rt))
    return out


def run_convergence_study(spec: ExperimentSpec, workers: int = 1) -> ErrorReport:
    """Run every N of ``spec`` and tabulate errors, conserved ratios and rates.

    Rows run in a process pool when ``workers > 1``; results are collected
    and sorted by N before anything is emitted, so the report does not
    depend on the worker count.
    """
    t0 = time.perf_counter()
    lam = resolve_step_ratio(spec)
    ref = _reference_for(spec, lam)
    jobs = [(spec, n, lam, ref) for n in spec.n_list]
    if workers > 1 and len(jobs) > 1:
        ctx = multiprocessing.get_context("fork" if os.name == "posix" else "spawn")
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs)), mp_context=ctx) as pool:
            results = list(pool.map(_row_job, jobs))
    else:
        results = [_row_job(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    rows = fill_rates([row for _, row, err in results if row is not None])
    failures = {n: err for n, _, err in results if err is not None}
    meta = {
        "case": spec.case,
        "t_start": repr(spec.t_start),
        "t_end": repr(spec.t_end),
        "config_hash": spec_hash(spec),
        "step_policy": spec.step_policy,
        "lambda0": "adaptive" if lam is None else repr(lam),
        "step_exponent": repr(step_exponent(spec.stepper.regime)),
        "reference": spec.reference if spec.n_fine is None else f"{spec.reference}({spec.n_fine})",
        "backend": kernels.BACKEND,
        "wall_time_s": f"{time.perf_counter() - t0:.3f}",
    }
    for n, err in failures.items():
        log.warning("row N=%d failed: %s", n, err)
    return ErrorReport(rows, meta, failures)


# --- output ---------------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return "NA"
    return format(float(v), ".17g")


def format_report_csv(report: ErrorReport) -> str:
    lines = [CSV_HEADER]
    for r in report.rows:
        lines.append(",".join([str(r.N), _cell(r.E), _cell(r.c1), _cell(r.c2), _cell(r.c3),
                               "" if r.rate is None else _cell(r.rate)]))
    return "\n".join(lines) + "\n"


def parse_report_csv(text: str) -> list:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigurationError(f"expected header {CSV_HEADER!r}")
    rows = []
    conv = lambda s: None if s in ("", "NA") else float(s)  # noqa: E731
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ConfigurationError(f"bad report row {ln!r}")
        rows.append(ReportRow(int(parts[0]), float(parts[1]), conv(parts[2]), conv(parts[3]),
                              conv(parts[4]), conv(parts[5])))
    return rows


def format_metadata(report: ErrorReport) -> str:
    lines = [f"{k} = {v}" for k, v in report.metadata.items()]
    for n, err in sorted(report.failures.items()):
        lines.append(f"failed_N{n} = {err}")
    for r in report.rows:
        lines.append(f"row_N{r.N} = steps {r.steps}, max_fp_iterations {r.max_fp_iterations}, "
                     f"max_increment_ratio {r.max_increment_ratio:.3g}, "
                     f"max_c2_drift {r.max_c2_drift:.3g}")
    return "\n".join(lines) + "\n"


def write_report(report: ErrorReport, path) -> None:
    """CSV table at ``path`` plus a ``path.meta`` sidecar with run metadata."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_report_csv(report))
    with open(path + ".meta", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_metadata(report))


__all__ = ["ExperimentSpec", "ErrorReport", "ReportRow", "CSV_HEADER", "default_spec",
           "parse_config", "emit_config", "load_config", "run_convergence_study",
           "run_row", "fill_rates", "format_report_csv", "parse_report_csv",
           "write_report", "resolve_step_ratio", "spec_hash"]

"""Command line entry point: ``kdvcn {selftest,run,convergence,weight}``.

Exit codes: 0 success, 1 solver failure or failed check, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from .diagnostics import ConservationTracker, conserved
from .errors import ConfigurationError, InputError, KdvError
from .harness import load_config, run_convergence_study, write_report
from .lattice import Grid, build_weight
from .reference import CASES, canonical_case, frozen_ratio, initial_datum, step_exponent
from .snapshots import write_snapshot
from .stepper import Regime, StepperConfig, evolve

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kdvcn", description="Conservative Crank-Nicolson KdV solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    st = sub.add_parser("selftest", help="operator identity and conservation checks")
    st.add_argument("--samples", type=int, default=1000)

    run = sub.add_parser("run", help="one evolution with snapshots")
    run.add_argument("--case", required=True)
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--t-end", type=float, required=True,
                     help="evolution time, measured from the case's initial time")
    run.add_argument("--snapshot-every", type=int, default=0, metavar="K")
    run.add_argument("--out", required=True)
    run.add_argument("--adaptive", action="store_true",
                     help="re-apply the CFL law every step instead of a frozen ratio")

    conv = sub.add_parser("convergence", help="run a convergence study from a config file")
    conv.add_argument("--config", required=True)
    conv.add_argument("--out", default=None)
    conv.add_argument("--workers", type=int, default=1)

    wt = sub.add_parser("weight", help="tabulate the weight profile")
    wt.add_argument("--radius", type=float, required=True)
    wt.add_argument("--n", type=int, required=True)
    wt.add_argument("--out", required=True)
    wt.add_argument("--x-left", type=float, default=None)
    wt.add_argument("--x-right", type=float, default=None)
    return p


def _selftest(args) -> int:
    from .selftest import run_all

    ok = True
    for r in run_all(args.samples):
        if r.informational:
            tag = "info"
        else:
            tag = "PASS" if r.passed else "FAIL"
            ok &= r.passed
        print(f"[{tag}] {r.name}: defect {r.defect:.3e} (tol {r.tol:.1e})")
    return EXIT_OK if ok else EXIT_FAIL


def _snapshot_name(out: str, step: int) -> str:
    stem, ext = os.path.splitext(out)
    return f"{stem}_{step:07d}{ext or '.csv'}"


def _run(args) -> int:
    case = canonical_case(args.case)
    d = CASES[case]
    if args.t_end <= 0:
        raise ConfigurationError("--t-end must be positive")
    if args.snapshot_every < 0:
        raise ConfigurationError("--snapshot-every must be non-negative")
    grid = Grid.from_window(d.window[0], d.window[1], args.n)
    cfg = StepperConfig(regime=d.regime)
    u0 = initial_datum(case, grid)
    wp = build_weight(grid, d.weight_radius) if cfg.regime is Regime.L2 else None
    dt = None
    lam = None
    if not args.adaptive:
        lam = frozen_ratio(u0, cfg, d.weight_radius)
        dt = lam * grid.dx ** step_exponent(cfg.regime)
    tracker = ConservationTracker(u0)
    observers = [tracker]
    meta = {"case": case, "lambda0": "adaptive" if lam is None else repr(lam)}
    if args.snapshot_every:
        def snap(u_prev, state):
            if state.step_index % args.snapshot_every == 0:
                write_snapshot(_snapshot_name(args.out, state.step_index), state.u,
                               dict(meta, t=repr(state.t)))
        observers.append(snap)
        write_snapshot(_snapshot_name(args.out, 0), u0, dict(meta, t=repr(d.t_start)))
    state, runlog = evolve(u0, d.t_start + args.t_end, cfg, wp, observers, dt=dt,
                           t_start=d.t_start)
    rec = conserved(state.u, u0, state.t)
    write_snapshot(args.out, state.u, dict(meta, t=repr(state.t)))
    fmt = lambda v: "NA" if v is None else f"{v:.12f}"  # noqa: E731
    print(f"steps {len(runlog)}  t {state.t!r}")
    print(f"C1 {fmt(rec.c1)}  C2 {fmt(rec.c2)}  C3 {fmt(rec.c3)}")
    print(f"max |C2-1| over run {tracker.max_c2_drift():.3e}")
    print(f"max fixed-point sweeps {int(np.max(runlog['fp_iterations']))}")
    return EXIT_OK


def _convergence(args) -> int:
    spec = load_config(args.config)
    out = args.out or spec.output_path
    if not out:
        raise ConfigurationError("no output path: pass --out or set output in the config")
    if args.workers < 1:
        raise ConfigurationError("--workers must be at least 1")
    report = run_convergence_study(spec, workers=args.workers)
    write_report(report, out)
    for r in report.rows:
        rate = "" if r.rate is None else f"{r.rate:.3f}"
        print(f"N={r.N:6d}  E={r.E:.4e}  C2={r.c2:.12f}  R_E={rate}")
    for n, err in sorted(report.failures.items()):
        print(f"N={n}: FAILED {err}", file=sys.stderr)
    return EXIT_FAIL if report.failures else EXIT_OK


def _weight(args) -> int:
    half = args.radius + 2.0
    x_left = -half if args.x_left is None else args.x_left
    x_right = half if args.x_right is None else args.x_right
    grid = Grid.from_window(x_left, x_right, args.n)
    wp = build_weight(grid, args.radius)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# radius_R={args.radius!r}\n# c_R={wp.c_R!r}\nx,p,p1,p2,p3\n")
        cols = (grid.x, wp.p.values, wp.p1.values, wp.p2.values, wp.p3.values)
        for row in zip(*cols):
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    print(f"c_R = {wp.c_R!r}")
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"selftest": _selftest, "run": _run, "convergence": _convergence,
                "weight": _weight}
    try:
        return handlers[args.command](args)
    except (ConfigurationError, InputError) as exc:
        print(f"kdvcn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"kdvcn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KdvError as exc:
        print(f"kdvcn: solver failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()

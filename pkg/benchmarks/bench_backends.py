"""Time the numba and numpy backends on the same workloads.

Each backend runs in its own interpreter because KDVCN_BACKEND is read at
import time. Usage::

    python benchmarks/bench_backends.py [--n 2000] [--steps 200] [--repeat 5]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, timeit
import numpy as np
from kdvcn import kernels
from kdvcn.lattice import Grid
from kdvcn.reference import one_soliton, sample
from kdvcn.stepper import StepperConfig, cfl_dt, evolve

n, steps, repeat = map(int, sys.argv[1:4])
g = Grid.from_window(-10.0, 10.0, n)
u0 = sample(lambda x: one_soliton(x, -1.0), g)
v = u0.values
cfg = StepperConfig()
dt = cfl_dt(u0, cfg)
k = kernels.impl
solver = kernels.LinearSolver(n, g.dx, dt)

def best(fn, number):
    fn()  # warm-up, includes jit compilation
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number

out = {
    "backend": kernels.BACKEND,
    "d3": best(lambda: k.d3(v, g.dx), 200),
    "nonlinear_g": best(lambda: k.nonlinear_g(v, g.dx), 200),
    "solver_setup": best(lambda: kernels.LinearSolver(n, g.dx, dt), 5),
    "linear_solve": best(lambda: solver.solve(v), 50),
    "cn_step": best(lambda: k.cn_fixed_point(v, dt, g.dx, solver, cfg.fp_tol,
                                             cfg.fp_max_iter), 10),
    "evolve": best(lambda: evolve(u0, -1.0 + steps * dt, cfg, dt=dt, t_start=-1.0), 1),
}
print(json.dumps(out))
"""


def run(backend, n, steps, repeat):
    env = dict(os.environ, KDVCN_BACKEND=backend)
    r = subprocess.run([sys.executable, "-c", WORKER, str(n), str(steps), str(repeat)],
                       env=env, capture_output=True, text=True, check=True)
    return json.loads(r.stdout)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--steps", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    res = {b: run(b, args.n, args.steps, args.repeat) for b in ("numba", "numpy")}
    print(f"N = {args.n}, {args.steps} CN steps for 'evolve'; best of {args.repeat}")
    print(f"{'kernel':<14}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}")
    for key in ("d3", "nonlinear_g", "solver_setup", "linear_solve", "cn_step", "evolve"):
        a, b = res["numba"][key], res["numpy"][key]
        print(f"{key:<14}{a:>12.3e}{b:>12.3e}{b / a:>10.2f}")
    if res["numba"]["backend"] != "numba":
        print("note: numba unavailable, both columns ran the numpy path")


if __name__ == "__main__":
    main()

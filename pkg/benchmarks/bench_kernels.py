"""Compare the compiled steering core against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--planner]

Prints one line per kernel with the median time per call for each backend
and the speed-up. ``--planner`` also times a short planning run with each
backend (in subprocesses, since the backend is fixed at import).
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from kinorrt import _pycore
from kinorrt.lti import build_double_integrator_2d, build_quadrotor_10d

try:
    from kinorrt import _core
except ImportError:
    _core = None

PLANNER_SNIPPET = """
import time
from kinorrt import BACKEND
from kinorrt.bench import run
from kinorrt.scenario import builtin_scenario
sc = builtin_scenario("double_integrator")
t = time.perf_counter()
res = run(sc, "kino", 1, iterations={iterations})
print(BACKEND, time.perf_counter() - t, res.nodes, res.best_cost)
"""


def _time(fn, repeat, number):
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        samples.append((time.perf_counter() - t0) / number)
    return statistics.median(samples)


def _cases(mod, system, penalty, label):
    S = None if penalty is None else penalty.S
    core = mod.SteeringCore(system.A, system.B, system.c, system.R, system.n1, S)
    rng = np.random.default_rng(0)
    n, n1 = system.n, system.n1
    xa = rng.normal(size=n)
    xc = rng.normal(size=n1) * 3
    xb = rng.normal(size=n) * 3
    XA = rng.normal(size=(64, n))
    XC = rng.normal(size=(64, n1)) * 3
    variant = mod.VARIANT_PENALTY if penalty is not None else mod.VARIANT_PFF
    M = np.zeros((2 * n + 1, 2 * n + 1))
    M[:n, :n] = system.A * 2.0
    lam0 = rng.normal(size=n)
    core.solve_free_time(variant, xa, xc, 0.05, 25.0)  # warm the grid cache
    return [
        (f"{label} expm {2 * n + 1}x{2 * n + 1}", lambda: mod.expm(M), 200),
        (f"{label} kernel", lambda: core.kernel(1.7), 200),
        (f"{label} fixed-state fixed-time", lambda: core.solve_fixed_time(mod.VARIANT_FIXED, xa, xb, 1.7), 200),
        (f"{label} PFF free-time", lambda: core.solve_free_time(variant, xa, xc, 0.05, 25.0), 20),
        (f"{label} PFF free-time batch x64",
         lambda: core.solve_free_time_batch(variant, XA, XC, 0.05, 25.0, 64, 1e-9), 2),
        (f"{label} flow 256 steps", lambda: core.flow(xa, lam0, 2.0, 256), 50),
    ]


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--planner", action="store_true", help="also time a short planning run")
    parser.add_argument("--iterations", type=int, default=300)
    args = parser.parse_args(argv)

    if _core is None:
        print("compiled core not built; only the Python backend is available")
    di = build_double_integrator_2d()
    quad, pen = build_quadrotor_10d()
    print(f"{'kernel':42s} {'python':>12s} {'compiled':>12s} {'speed-up':>9s}")
    for system, penalty, label in ((di, None, "DI"), (quad, pen, "quad")):
        py_cases = _cases(_pycore, system, penalty, label)
        c_cases = _cases(_core, system, penalty, label) if _core else [None] * len(py_cases)
        for (name, fpy, number), c in zip(py_cases, c_cases):
            tpy = _time(fpy, args.repeat, max(1, number // 10))
            if c is None:
                print(f"{name:42s} {tpy * 1e6:10.1f}us {'-':>12s}")
                continue
            tc = _time(c[1], args.repeat, number)
            print(f"{name:42s} {tpy * 1e6:10.1f}us {tc * 1e6:10.1f}us {tpy / tc:8.1f}x")

    if args.planner:
        snippet = PLANNER_SNIPPET.format(iterations=args.iterations)
        for pure in ("1", "0"):
            env = dict(os.environ, KINORRT_PURE_PYTHON=pure)
            out = subprocess.run([sys.executable, "-c", snippet], env=env,
                                 capture_output=True, text=True, check=True).stdout.split()
            print(f"planner DI kino N={args.iterations} [{out[0]}]: {float(out[1]):.2f}s, "
                  f"{out[2]} nodes, best cost {out[3]}")


if __name__ == "__main__":
    main()

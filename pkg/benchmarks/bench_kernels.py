"""Compare the numba kernels against the pure-numpy solver loops.

Runs each solver on the diagonal operator with both backends, checks the
traces agree, and prints median wall time over a few repeats.

    python3 benchmarks/bench_kernels.py [--n 100 1000] [--iters 2000] [--repeats 3]
"""

import argparse
import statistics
import time

import numpy as np

from adaptvi._accel import HAS_NUMBA
from adaptvi.geometry import ProxSetup
from adaptvi.operators import diag_problem, make_rng
from adaptvi.solvers import (
    SolverConfig,
    adaptive_delta_solve,
    adaptive_scaled_delta_solve,
    fixed_iters,
    ump_solve,
)

SOLVERS = {
    "alg1_ump": ump_solve,
    "alg3_delta": adaptive_delta_solve,
    "alg5_scaled": adaptive_scaled_delta_solve,
}


def start(n, seed=7):
    u = make_rng(seed).standard_normal(n)
    return u / np.linalg.norm(u)


def timed(fn, *args, repeats, **kw):
    times = []
    out = None
    for _ in range(repeats):
        t = time.perf_counter()
        out = fn(*args, **kw)
        times.append(time.perf_counter() - t)
    return out, statistics.median(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[100, 1000, 10000])
    ap.add_argument("--iters", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not HAS_NUMBA:
        print("numba unavailable (or disabled); nothing to compare")
        return

    cfg = SolverConfig(delta=0.01, keep_iterates=False)
    print(f"{'solver':<12} {'n':>6} {'iters':>6} {'numpy s':>9} {'numba s':>9} {'speedup':>8} {'max |dL|':>9}")
    for n in args.n:
        prob = diag_problem(n, 1.0)
        setup = ProxSetup(start(n))
        for name, fn in SOLVERS.items():
            stop = fixed_iters(args.iters)
            fn(prob, setup, cfg, stop, use_kernels=True)  # compile outside the timing
            tk, t_numba = timed(fn, prob, setup, cfg, stop, use_kernels=True, repeats=args.repeats)
            tp, t_numpy = timed(fn, prob, setup, cfg, stop, use_kernels=False, repeats=args.repeats)
            dL = float(np.max(np.abs(tk.L - tp.L))) if len(tk) == len(tp) else float("inf")
            print(f"{name:<12} {n:>6} {len(tk):>6} {t_numpy:>9.3f} {t_numba:>9.3f} {t_numpy / t_numba:>7.1f}x {dL:>9.1e}")


if __name__ == "__main__":
    main()

"""Time the compiled lattice scan against the numpy fallback.

    python benchmarks/bench_kernels.py [--steps 200 400] [--repeat 3]

Both backends run on the same problems and must agree exactly; the script
exits non-zero otherwise.
"""
import argparse
import sys
import time

import numpy as np

from prevision.kernels import _grid_py

try:
    from prevision.kernels import _grid
except ImportError:
    _grid = None


def problems():
    """(name, n, a_eq row or None, bilinear rows) for scan-sized realms."""
    e = np.eye(4, dtype=np.int64)
    yield "4 cells, q1*q2 <= q3*q4", 4, None, np.stack([e[0], e[1], e[2], e[3]])[None]
    yield "5 cells, one equality", 5, np.array([[0, 0, 1, 1, 0]]), np.zeros((0, 4, 5), dtype=np.int64)


def run(fn, steps, n, a_eq, bil):
    if a_eq is None:
        a_eq, b_eq, elim = np.zeros((0, n), dtype=np.int64), np.zeros(0, dtype=np.int64), -1
    else:
        b_eq, elim = np.array([int(0.3 * steps)], dtype=np.int64), 0
    a_ub = np.ones((1, n), dtype=np.int64)
    b_ub = np.array([steps], dtype=np.int64)
    num = np.zeros(n, dtype=np.int64)
    num[0] = 1
    den = np.ones(n, dtype=np.int64)
    den[-1] = 0
    return fn(steps, a_eq, b_eq, a_ub, b_ub, bil, num, den, elim)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, nargs="+", default=[100, 200])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if _grid is None:
        print("compiled module not built; run `pip install -e . --no-build-isolation` first")
        return 1
    print(f"{'problem':28s} {'steps':>6s} {'points':>11s} {'compiled s':>11s} {'numpy s':>9s} {'speedup':>8s}")
    status = 0
    for name, n, a_eq, bil in problems():
        for steps in args.steps:
            times = {}
            out = {}
            for label, fn in (("compiled", _grid.grid_extrema), ("numpy", _grid_py.grid_extrema)):
                best = float("inf")
                for _ in range(args.repeat):
                    t0 = time.perf_counter()
                    out[label] = run(fn, steps, n, a_eq, bil)
                    best = min(best, time.perf_counter() - t0)
                times[label] = best
            a, b = out["compiled"], out["numpy"]
            if a[:5] != b[:5]:
                print(f"  backends disagree on {name} at {steps}: {a[:5]} vs {b[:5]}")
                status = 1
            print(f"{name:28s} {steps:6d} {a[0]:11d} {times['compiled']:11.4f} {times['numpy']:9.4f} "
                  f"{times['numpy'] / times['compiled']:8.1f}x")
    return status


if __name__ == "__main__":
    sys.exit(main())

"""Compiled vs numpy kernels on problem sizes seen in the validation runs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-N wall time per kernel for each backend and the speedup.
"""

import argparse
import time

import numpy as np

from gapmodes import _pykernels

try:
    from gapmodes import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def best_of(fn, repeat):
    t = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        t = min(t, time.perf_counter() - t0)
    return t


def cases():
    rng = np.random.default_rng(0)
    n = 400_000  # graded-mesh size for the smallest epsilon is ~25k; uniform Q != 0 meshes are larger
    diag = 2.0 + rng.standard_normal(n)
    off2 = np.full(n - 1, 1.0)
    shift = np.float64(0.3)
    shifts = np.linspace(-1.0, 5.0, 32)
    # one period resolved at eps = 0.05 (2000 steps), 100 periods
    m = 200_000
    h = 1.0 / 2000
    x = np.arange(m) * h
    v1 = 2 * np.cos(2 * np.pi * (x + (0.5 - np.sqrt(3) / 6) * h))
    v2 = 2 * np.cos(2 * np.pi * (x + (0.5 + np.sqrt(3) / 6) * h))
    E = 39.5
    return {
        "sturm_count": lambda k: k.sturm_count(diag, off2, shift, 1e-300),
        "sturm_count_many(32)": lambda k: k.sturm_count_many(diag, off2, shifts, 1e-300),
        "magnus_transfer": lambda k: k.magnus_transfer(v1, v2, h, E),
        "magnus_orbit": lambda k: k.magnus_orbit(v1[:20000], v2[:20000], h, E, 1.0, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    print(f"{'kernel':24s} {'cython [s]':>12s} {'python [s]':>12s} {'speedup':>9s}")
    for name, call in cases().items():
        tp = best_of(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:24s} {'n/a':>12s} {tp:12.4f} {'':>9s}")
            continue
        tc = best_of(lambda: call(_ckernels), args.repeat)
        print(f"{name:24s} {tc:12.4f} {tp:12.4f} {tp / tc:9.1f}")


if __name__ == "__main__":
    main()

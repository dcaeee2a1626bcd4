"""Times the compiled aggregation kernels against the NumPy fallback.

Usage: python benchmarks/bench_kernels.py [--rows N] [--groups G] [--repeat R]
"""

import argparse
import time

import numpy as np

from featforge.engine import AggregationFunction, _aggkernels_py
from featforge.engine import kernels


def build_segments(rows: int, groups: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    gids = np.sort(rng.integers(0, groups, size=rows))
    values = rng.normal(size=rows)
    order = np.lexsort((values, gids))
    values = values[order]
    counts = np.bincount(gids, minlength=groups)
    starts = np.zeros(groups + 1, dtype=np.intp)
    np.cumsum(counts, out=starts[1:])
    return values, starts


def timed(fn, values, starts, fn_id, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(values, starts, fn_id)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--rows", type=int, default=200_000)
    parser.add_argument("--groups", type=int, default=2_000)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    values, starts = build_segments(args.rows, args.groups)
    print(f"active backend: {kernels.BACKEND}")
    print(f"{args.rows} rows, {args.groups} groups, best of {args.repeat}\n")
    print(f"{'function':<16}{'numpy (ms)':>12}{'compiled (ms)':>15}{'speedup':>9}")
    for fn in AggregationFunction:
        py = timed(_aggkernels_py.segment_aggregate, values, starts, int(fn), args.repeat)
        if kernels.BACKEND == "cython":
            cy = timed(kernels.segment_aggregate, values, starts, int(fn), args.repeat)
            print(f"{fn.name:<16}{py * 1e3:>12.2f}{cy * 1e3:>15.2f}{py / cy:>9.1f}x")
        else:
            print(f"{fn.name:<16}{py * 1e3:>12.2f}{'n/a':>15}{'':>9}")
    if kernels.BACKEND != "cython":
        print("\ncompiled extension not built; install with `pip install -e .` to compare")


if __name__ == "__main__":
    main()

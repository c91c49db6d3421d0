"""Benchmark the compiled queue kernel against its plain-Python twin.

Usage: python benchmarks/bench_queue_kernel.py [n_arrivals]

The kernel replays a multi-server FIFO queue over pre-drawn arrival and
service arrays.  Set BUSINTERLINE_NO_NUMBA=1 to force the whole package
onto the fallback path; this script times both paths side by side
regardless.
"""

import sys
import time

import numpy as np

from businterline import _kernels


def draw(n, c, seed=0):
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0, n))
    services = rng.exponential(0.8 * c, n)
    return arrivals, services


def time_fn(fn, arrivals, services, c, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        busy = np.zeros(c)
        start = time.perf_counter()
        result = fn(arrivals, services, busy, 0)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    print(f"queue kernel benchmark: {n:,} arrivals "
          f"(numba active: {_kernels.USING_NUMBA})")
    print(f"{'servers':>8} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for c in (1, 4, 16, 48):
        arrivals, services = draw(n, c)
        t_py, r_py = time_fn(_kernels._queue_wait_loop, arrivals, services, c,
                             repeats=1)
        if _kernels.USING_NUMBA:
            _kernels.queue_wait_loop(arrivals[:100], services[:100],
                                     np.zeros(c), 0)  # compile outside timing
            t_jit, r_jit = time_fn(_kernels.queue_wait_loop, arrivals, services, c)
        else:
            t_jit, r_jit = t_py, r_py
        assert r_py == r_jit, "paths disagree"
        print(f"{c:>8} {t_py:>11.3f}s {t_jit:>11.4f}s {t_py / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()

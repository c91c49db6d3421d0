"""Hot numeric kernels.

The multi-server queue replay below is the one loop in the package that
iterates millions of times per call, so it is compiled with numba when
available.  Setting the environment variable ``BUSINTERLINE_NO_NUMBA=1``
(or any value other than 0/false) selects the plain Python fallback,
which runs the very same function body and therefore produces
bit-identical results.
"""

from __future__ import annotations

import os

import numpy as np


def _numba_requested() -> bool:
    flag = os.environ.get("BUSINTERLINE_NO_NUMBA", "").strip().lower()
    return flag in ("", "0", "false", "no")


def _queue_wait_loop(arrivals, services, busy_until, skip):
    """Replay a FIFO multi-server queue.

    arrivals: absolute arrival times, non-decreasing.
    services: service duration per customer.
    busy_until: per-server next-free times, mutated in place.
    skip: number of leading customers excluded from the statistics
    (warm-up transient).

    Returns (mean wait, fraction of counted customers that waited).
    """
    n = arrivals.shape[0]
    total_wait = 0.0
    waited = 0
    counted = 0
    for i in range(n):
        t = arrivals[i]
        j = 0
        best = busy_until[0]
        for s in range(1, busy_until.shape[0]):
            if busy_until[s] < best:
                best = busy_until[s]
                j = s
        start = best
        if start < t:
            start = t
        busy_until[j] = start + services[i]
        if i >= skip:
            w = start - t
            total_wait += w
            counted += 1
            if w > 0.0:
                waited += 1
    if counted == 0:
        return 0.0, 0.0
    return total_wait / counted, waited / counted


USING_NUMBA = False
queue_wait_loop = _queue_wait_loop

if _numba_requested():
    try:
        from numba import njit

        queue_wait_loop = njit(cache=True)(_queue_wait_loop)
        USING_NUMBA = True
    except ImportError:
        pass


def simulate_queue_waits(arrivals: np.ndarray, services: np.ndarray,
                         servers: int, skip: int = 0) -> tuple[float, float]:
    """Run the queue replay kernel on pre-drawn arrival/service arrays."""
    busy = np.zeros(int(servers), dtype=np.float64)
    arr = np.ascontiguousarray(arrivals, dtype=np.float64)
    svc = np.ascontiguousarray(services, dtype=np.float64)
    mean_wait, frac = queue_wait_loop(arr, svc, busy, int(skip))
    return float(mean_wait), float(frac)

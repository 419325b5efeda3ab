"""Wall-clock timing of the structured and dense solvers on random walks."""

from __future__ import annotations

import statistics
import time

import numpy as np

from .model import ProblemSpec
from .oracle import solve_dense
from .solver import solve_minimum_snap
from .waypoints import random_walk_positions

DENSE_MAX_K = 200
METHODS = ("structured", "dense")


def random_walk_spec(k: int, seed: int = 0, s: int = 5) -> ProblemSpec:
    """Waypoint problem: unit time steps, positions fixed everywhere, rest ends."""
    return ProblemSpec.waypoints(np.arange(k + 1, dtype=float), random_walk_positions(k, seed), s)


def _run(method, spec):
    if method == "structured":
        solve_minimum_snap(spec)
    elif method == "dense":
        solve_dense(spec, "nondimensional")
    else:
        raise ValueError(f"unknown method {method!r}")


def time_solve(method: str, spec: ProblemSpec, reps: int = 3) -> float:
    """Median wall time of ``reps`` solves, after one untimed warm-up solve."""
    if method == "dense" and spec.k > DENSE_MAX_K:
        raise ValueError(f"dense method is capped at k <= {DENSE_MAX_K}, got k={spec.k}")
    _run(method, spec)
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        _run(method, spec)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def run_bench(ks, methods, reps: int = 3, seed: int = 0, s: int = 5) -> list[dict]:
    """One row ``{method, k, reps, median_seconds}`` per (method, k)."""
    for m in methods:
        if m == "dense" and max(ks) > DENSE_MAX_K:
            raise ValueError(f"dense method is capped at k <= {DENSE_MAX_K}, got k={max(ks)}")
    rows = []
    for k in ks:
        spec = random_walk_spec(k, seed, s)
        for m in methods:
            rows.append({"method": m, "k": k, "reps": reps, "median_seconds": time_solve(m, spec, reps)})
    return rows


def loglog_slope(ks, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` against ``log(k)``."""
    return float(np.polyfit(np.log(ks), np.log(seconds), 1)[0])

"""Timing comparison between the numba and numpy kernel backends.

Runs the same workloads under both backends, reports wall time per
iteration, and checks that the parameter trajectories agree bitwise.
Usage: python -m teleportsim.benchmark [--T 2000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import os
import time

import numpy as np

from ._backend import numba_available
from .algorithms import run_dsgd, run_teleportation
from .problem import NoiseModel, make_quadratic
from .streams import StreamPlan
from .topology import build_topology


def _run_case(name: str, T: int) -> tuple:
    plan = StreamPlan(7)
    problem = make_quadratic(100, 50, 10.0, plan.problem_stream())
    noise = NoiseModel(10.0)
    init = np.ones(50)
    if name == "teleport k=8":
        trace = run_teleportation(
            problem, noise, build_topology("ring", 8), 0.001, T, plan, init
        )
    else:
        trace = run_dsgd(
            problem, noise, build_topology("ring", 100), 0.001, T, plan, init
        )
    return trace.final_params, trace.final_error


def _time_case(name: str, T: int, repeat: int) -> tuple:
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = _run_case(name, T)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--T", type=int, default=2000)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    if not numba_available():
        print("numba is not importable; nothing to compare")
        return 1

    cases = ("teleport k=8", "dsgd ring n=100")
    print(f"workload: n=100 d=50 sigma2=10 zeta2=10, T={args.T}, best of {args.repeat}")
    for name in cases:
        results = {}
        for backend in ("numba", "numpy"):
            os.environ["TELEPORTSIM_BACKEND"] = backend
            if backend == "numba":
                _run_case(name, 10)  # compile before timing
            elapsed, (params, err) = _time_case(name, args.T, args.repeat)
            results[backend] = (elapsed, params, err)
            print(
                f"{name:18s} {backend:6s} {elapsed:8.3f} s"
                f"  ({1e6 * elapsed / args.T:7.2f} us/iter)  final error {err:.6e}"
            )
        same = np.array_equal(results["numba"][1], results["numpy"][1])
        speedup = results["numpy"][0] / results["numba"][0]
        print(
            f"{name:18s} parameters bitwise equal: {same}, "
            f"numba speedup {speedup:.2f}x"
        )
        if not same:
            os.environ.pop("TELEPORTSIM_BACKEND", None)
            return 1
    os.environ.pop("TELEPORTSIM_BACKEND", None)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

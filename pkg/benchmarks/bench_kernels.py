"""Benchmark the jitted kernels against their numpy fallbacks.

Runs each hot kernel on a representative workload under both backends
and prints per-call timings. The numba timings exclude compilation
(one warmup call per kernel).

    python benchmarks/bench_kernels.py [--repeat N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from otalign import kernels


def _time(fn, args_list, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        for args in args_list:
            fn(*args)
        best = min(best, time.perf_counter() - start)
    return best / len(args_list)


def _levenshtein_workload(rng, n=2000):
    return [
        (
            rng.integers(97, 123, size=int(rng.integers(2, 9))),
            rng.integers(97, 123, size=int(rng.integers(2, 9))),
        )
        for _ in range(n)
    ]


def _pairing_workload(rng, n=500):
    return [(rng.random((int(rng.integers(10, 41)), int(rng.integers(10, 41)))),) for _ in range(n)]


def _sinkhorn_workload(rng, n=500):
    work = []
    for _ in range(n):
        kernel = np.exp(-10.0 * rng.random((10, 10)))
        work.append((kernel, rng.dirichlet(np.ones(10)), rng.dirichlet(np.ones(10)), 1e-5, 1000))
    return work


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=3, help="timing repetitions, best kept")
    args = parser.parse_args()

    rng = np.random.default_rng(0)
    workloads = {
        "levenshtein": _levenshtein_workload(rng),
        "pairing_table": _pairing_workload(rng),
        "sinkhorn_scale": _sinkhorn_workload(rng),
    }

    numpy_impls = kernels.get_impls("numpy")
    numba_impls = kernels.get_impls("numba")

    print(f"{'kernel':<16} {'numpy/call':>12} {'numba/call':>12} {'speedup':>8}")
    for name, work in workloads.items():
        numba_impls[name](*work[0])  # compile outside the timer
        t_numpy = _time(numpy_impls[name], work, args.repeat)
        t_numba = _time(numba_impls[name], work, args.repeat)
        print(
            f"{name:<16} {t_numpy * 1e6:>10.1f}us {t_numba * 1e6:>10.1f}us "
            f"{t_numpy / t_numba:>7.1f}x"
        )


if __name__ == "__main__":
    main()

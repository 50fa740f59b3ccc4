"""Benchmark the branch-and-bound node-scoring kernel: numba JIT vs numpy.

Run:  python3 benchmarks/bench_kernels.py
The numpy path is the one selected when RULESEEKER_NO_NUMBA=1.
"""
import time

import numpy as np

from ruleseeker import kernels
from ruleseeker.solver import SolveInstance, solve_cop


def bench_kernel(m, d, fired_frac, reps=200):
    rng = np.random.default_rng(0)
    U = rng.integers(0, 2, size=(m, d), dtype=np.uint8)
    nf = max(1, int(m * fired_frac))
    fired = np.sort(rng.choice(m, size=nf, replace=False)).astype(np.int64)
    cand = np.arange(d, dtype=np.int64)
    v = rng.integers(0, 2, size=m)
    w = rng.integers(1, 4, size=m).astype(np.int64)
    wneg = np.where(v == 0, w, 0).astype(np.int64)
    wpos = np.where(v == 1, w, 0).astype(np.int64)

    results = {}
    impls = [("numpy", kernels.node_scores_numpy)]
    if kernels.NUMBA_ENABLED:
        impls.append(("numba", kernels.node_scores_numba))
    for name, fn in impls:
        fn(U, fired, cand, wneg, wpos)  # warm up (JIT compile)
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(U, fired, cand, wneg, wpos)
        results[name] = (time.perf_counter() - t0) / reps
    return results


def bench_solve(m, d, k, reps=5):
    rng = np.random.default_rng(1)
    U = rng.integers(0, 2, size=(m, d), dtype=np.uint8)
    v = rng.integers(0, 2, size=m, dtype=np.uint8)
    inst = SolveInstance.from_matrices(U, v, k, "cop", time_limit=300.0)
    solve_cop(inst)  # warm
    t0 = time.perf_counter()
    for _ in range(reps):
        solve_cop(inst)
    return (time.perf_counter() - t0) / reps


def main():
    print(f"numba available: {kernels.NUMBA_ENABLED}")
    print()
    print(f"{'kernel case':<34}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for m, d, frac in [
        (200, 12, 1.0),
        (1000, 40, 1.0),
        (1000, 40, 0.1),
        (5000, 60, 1.0),
        (5000, 60, 0.05),
        (20000, 100, 0.02),
    ]:
        r = bench_kernel(m, d, frac)
        np_us = r["numpy"] * 1e6
        if "numba" in r:
            nb_us = r["numba"] * 1e6
            ratio = f"{np_us / nb_us:.1f}x"
            nb_str = f"{nb_us:10.1f}us"
        else:
            nb_str, ratio = "n/a", "-"
        print(f"m={m:<6} d={d:<4} fired={frac:<11}{np_us:10.1f}us{nb_str:>12}{ratio:>10}")

    print()
    print("full branch-and-bound solve (selected kernel):")
    for m, d, k in [(500, 30, 4), (1000, 40, 5), (2000, 60, 5)]:
        avg = bench_solve(m, d, k)
        print(f"  m={m:<6} d={d:<4} k={k}: {avg * 1e3:8.1f} ms/solve")


if __name__ == "__main__":
    main()

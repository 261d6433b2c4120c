"""Benchmark the numba-jitted kernels against their pure-numpy fallbacks.

Runs both code paths in one process (the jitted functions are compiled at
import when numba is available), so no env juggling is needed:

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from bmanifold import kernels

N_REPEAT = 5


def bench(label, fn, *args):
    fn(*args)  # warm-up / JIT compile
    best = float("inf")
    for _ in range(N_REPEAT):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    print(f"  {label:<14s} {best * 1e3:8.2f} ms")


def main():
    rng = np.random.default_rng(0)

    print("pitch_peaks: 6000 frames x 400 samples, lags 32..213")
    frames = rng.standard_normal((6000, 400))
    if kernels.HAVE_NUMBA:
        bench("numba", kernels._pitch_peaks_jit, frames, 32, 213)
    bench("numpy", kernels._pitch_peaks_np, frames, 32, 213)

    print("levinson_batch: 6000 frames, order 8")
    r = rng.standard_normal((6000, 9))
    r[:, 0] = np.abs(r[:, 0]) + 9.0  # keep autocorrelations well-posed
    if kernels.HAVE_NUMBA:
        bench("numba", kernels._levinson_batch_jit, r)
    bench("numpy", kernels._levinson_batch_np, r)

    print("nn_argmin: 2000 queries x 20000 references, dim 64")
    queries = rng.standard_normal((2000, 64))
    refs = rng.standard_normal((20000, 64))
    groups = rng.integers(0, 20, 20000).astype(np.int64)
    if kernels.HAVE_NUMBA:
        bench("numba", kernels._nn_argmin_jit, queries, refs, groups, 3)
    bench("numpy", kernels._nn_argmin_np, queries, refs, groups, 3)

    if not kernels.HAVE_NUMBA:
        print("note: numba unavailable or disabled; only numpy path timed")


if __name__ == "__main__":
    main()

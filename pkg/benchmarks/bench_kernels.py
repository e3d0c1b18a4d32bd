#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallbacks.

Run after building the extension (pip install -e . --no-build-isolation):

    python benchmarks/bench_kernels.py

Times one representative workload per kernel and prints the speedup.  The
fallback Monte Carlo sweep is intentionally loop-for-loop identical to the
compiled one, so it is slow; the integrator fallbacks are vectorized numpy
and closer.
"""

import math
import time

import numpy as np

from annealtrack import _kernels_py

try:
    from annealtrack import _kernels as _kernels_cy
except ImportError:
    _kernels_cy = None


def timeit(fn, *args, repeat=3):
    best = math.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_sqa(mod, spins):
    rng = np.random.default_rng(0)
    n = spins.shape[1]
    j = rng.normal(size=(n, n))
    j = np.ascontiguousarray(np.triu(j, 1) + np.triu(j, 1).T)
    fields = rng.normal(size=n)
    u_m = rng.random((20, spins.shape[0], n))
    u_c = rng.random((20, n))
    return timeit(mod.sqa_run_point, spins.copy(), j, fields, 0.03, 0.2, 10.0,
                  u_m, u_c)


def bench_lindblad_split(mod, n):
    rng = np.random.default_rng(1)
    d = 1 << n
    rho = np.eye(d, dtype=complex) / d
    hd = rng.normal(size=d)
    ex = rng.normal(size=d)
    from scipy.linalg import expm
    sops = np.ascontiguousarray(np.stack(
        [expm(0.01 * rng.normal(size=(4, 4))).astype(complex)
         for _ in range(n)]))
    return timeit(mod.lindblad_split_node, rho.copy(), hd, ex, sops,
                  1.0, 0.5, 0.2, 0.9, 1e-9, 2000, n)


def bench_sw(mod):
    rng = np.random.default_rng(2)
    n_q, n_t = 2, 64
    omega_c = 2 * math.pi * 5e9
    wq = np.ascontiguousarray(2 * math.pi * 5.5e9 * np.ones((n_q, n_t)))
    g = np.ascontiguousarray(2 * math.pi * 5e6 * np.ones((n_q, n_t)))
    lam = np.ascontiguousarray(2 * math.pi * 1e6 * np.ones((n_q, n_t)))
    th = np.zeros((n_q, n_t))
    y0 = np.zeros((n_q, 3), dtype=complex)
    dt = 2e-10
    sub = int(math.ceil(dt * omega_c / 0.1))
    return timeit(mod.sw_rk4_grid, wq, g, lam, th, omega_c, dt, sub, y0)


def main():
    if _kernels_cy is None:
        print("compiled kernels unavailable; showing fallback times only")
    rng = np.random.default_rng(3)
    spins = rng.choice(np.array([-1, 1], dtype=np.int8), size=(32, 16))

    rows = [
        ("sqa sweeps (P=32, n=16, 20 sweeps)",
         bench_sqa(_kernels_py, spins),
         bench_sqa(_kernels_cy, spins) if _kernels_cy else None),
        ("lindblad split step (n=5, 2000 steps)",
         bench_lindblad_split(_kernels_py, 5),
         bench_lindblad_split(_kernels_cy, 5) if _kernels_cy else None),
        ("sw coefficient ODE (2 qubits, 64 nodes)",
         bench_sw(_kernels_py),
         bench_sw(_kernels_cy) if _kernels_cy else None),
    ]
    print(f"{'kernel':<42}{'python':>12}{'compiled':>12}{'speedup':>10}")
    for name, t_py, t_cy in rows:
        if t_cy is None:
            print(f"{name:<42}{t_py:>11.4f}s{'-':>12}{'-':>10}")
        else:
            print(f"{name:<42}{t_py:>11.4f}s{t_cy:>11.4f}s{t_py / t_cy:>9.1f}x")


if __name__ == "__main__":
    main()

"""Compiled vs pure-Python PELT kernel benchmark.

Times both paths on noisy step signals of increasing length (the pooled
novelty grids of long videos reach tens of thousands of bins) and checks
they return identical change sets.

Run: python benchmarks/bench_pelt.py
"""

from __future__ import annotations

import time

import numpy as np

from videoquorum import _pelt_py
from videoquorum.changepoint import COMPILED_KERNEL

try:
    from videoquorum import _speedups
except ImportError:
    _speedups = None


def step_signal(n: int, segments: int, rng: np.random.Generator) -> np.ndarray:
    edges = np.sort(rng.choice(np.arange(1, n), size=segments - 1, replace=False))
    levels = rng.normal(0.0, 3.0, size=segments)
    signal = np.empty(n)
    bounds = [0, *edges.tolist(), n]
    for level, (a, b) in zip(levels, zip(bounds, bounds[1:])):
        signal[a:b] = level
    return signal + rng.normal(0.0, 0.5, size=n)


def time_call(fn, *args, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    rng = np.random.default_rng(7)
    print(f"compiled kernel available: {COMPILED_KERNEL}")
    print(f"{'n':>7} {'min_size':>8} {'pure (s)':>10} {'compiled (s)':>12} {'speedup':>8}")
    for n in (500, 2000, 8000, 30000):
        values = step_signal(n, segments=max(2, n // 400), rng=rng)
        penalty = float(np.var(values))
        min_size = max(1, n // 250)
        pure_changes = _pelt_py.pelt_changes(values, penalty, min_size)
        pure_t = time_call(_pelt_py.pelt_changes, values, penalty, min_size)
        if _speedups is None:
            print(f"{n:>7} {min_size:>8} {pure_t:>10.4f} {'-':>12} {'-':>8}")
            continue
        fast_changes = _speedups.pelt_changes(values, penalty, min_size)
        assert fast_changes == pure_changes, "kernel mismatch"
        fast_t = time_call(_speedups.pelt_changes, values, penalty, min_size)
        print(f"{n:>7} {min_size:>8} {pure_t:>10.4f} {fast_t:>12.4f} {pure_t / fast_t:>7.1f}x")


if __name__ == "__main__":
    main()

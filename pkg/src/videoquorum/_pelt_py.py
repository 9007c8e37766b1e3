"""Pure-Python PELT with an in-DP minimum-segment-length constraint.

Reference implementation for the compiled kernel in ``_speedups.pyx``; both
must return identical change sets. Pruning is delayed by ``min_size`` steps:
the classic prune test at time t only guarantees domination from t+min_size
on once segments shorter than min_size are forbidden, so candidates are
scheduled for removal rather than dropped immediately.
"""

from __future__ import annotations

import numpy as np

COMPILED = False


def pelt_changes(values, penalty: float, min_size: int) -> list[int]:
    """Indices where new segments start, minimizing l2 cost + penalty per change.

    Segments created by changes must have at least ``min_size`` points; the
    unsegmented whole is always admissible.
    """
    x = np.asarray(values, dtype=np.float64)
    n = int(x.size)
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    if n < 2 * min_size:
        return []
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    s2 = np.concatenate(([0.0], np.cumsum(x * x)))

    def seg_cost(a: int, b: int) -> float:
        d = s1[b] - s1[a]
        return (s2[b] - s2[a]) - d * d / (b - a)

    inf = float("inf")
    best_cost = np.full(n + 1, inf)
    best_cost[0] = -penalty
    prev = np.full(n + 1, -1, dtype=np.int64)
    candidates: list[int] = []
    prune_after: dict[int, int] = {}

    for t in range(1, n + 1):
        s_new = t - min_size
        if s_new >= 0 and best_cost[s_new] < inf:
            candidates.append(s_new)
        if not candidates:
            continue
        candidates = [s for s in candidates if prune_after.get(s, t + 1) > t]
        best = inf
        arg = -1
        for s in candidates:
            v = best_cost[s] + seg_cost(s, t) + penalty
            if v < best:
                best = v
                arg = s
        if arg < 0:
            continue
        best_cost[t] = best
        prev[t] = arg
        for s in candidates:
            if s not in prune_after and best_cost[s] + seg_cost(s, t) > best:
                prune_after[s] = t + min_size

    changes: list[int] = []
    t = n
    while t > 0 and prev[t] > 0:
        changes.append(int(prev[t]))
        t = int(prev[t])
    changes.reverse()
    return changes

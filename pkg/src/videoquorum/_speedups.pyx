# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled PELT kernel; mirrors ``_pelt_py.pelt_changes`` operation for
operation so both paths return identical change sets."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

COMPILED = True

cdef double INF = float("inf")


def pelt_changes(values, double penalty, long min_size):
    """Indices where new segments start, minimizing l2 cost + penalty per change."""
    x = np.ascontiguousarray(values, dtype=np.float64)
    cdef long n = x.shape[0]
    if min_size < 1:
        raise ValueError("min_size must be >= 1")
    if penalty < 0:
        raise ValueError("penalty must be >= 0")
    if n < 2 * min_size:
        return []

    cdef cnp.ndarray[cnp.float64_t, ndim=1] s1 = np.empty(n + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] s2 = np.empty(n + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] best_cost = np.full(n + 1, INF, dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.full(n + 1, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cand = np.empty(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prune_after = np.full(n + 1, n + 2, dtype=np.int64)
    cdef double[::1] xv = x

    cdef long t, s, i, arg, s_new, kept, n_cand = 0
    cdef double acc1 = 0.0, acc2 = 0.0, v, best, d, cost

    s1[0] = 0.0
    s2[0] = 0.0
    for t in range(n):
        acc1 += xv[t]
        acc2 += xv[t] * xv[t]
        s1[t + 1] = acc1
        s2[t + 1] = acc2

    best_cost[0] = -penalty

    for t in range(1, n + 1):
        s_new = t - min_size
        if s_new >= 0 and best_cost[s_new] < INF:
            cand[n_cand] = s_new
            n_cand += 1
        if n_cand == 0:
            continue
        kept = 0
        for i in range(n_cand):
            s = cand[i]
            if prune_after[s] > t:
                cand[kept] = s
                kept += 1
        n_cand = kept
        best = INF
        arg = -1
        for i in range(n_cand):
            s = cand[i]
            d = s1[t] - s1[s]
            cost = (s2[t] - s2[s]) - d * d / (t - s)
            v = best_cost[s] + cost + penalty
            if v < best:
                best = v
                arg = s
        if arg < 0:
            continue
        best_cost[t] = best
        prev[t] = arg
        for i in range(n_cand):
            s = cand[i]
            if prune_after[s] > n + 1:
                d = s1[t] - s1[s]
                cost = (s2[t] - s2[s]) - d * d / (t - s)
                if best_cost[s] + cost > best:
                    prune_after[s] = t + min_size

    changes = []
    t = n
    while t > 0 and prev[t] > 0:
        changes.append(int(prev[t]))
        t = prev[t]
    changes.reverse()
    return changes

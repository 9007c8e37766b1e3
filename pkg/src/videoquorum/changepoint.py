"""PELT head: multi-scale max pooling, penalized l2 segmentation, and
boundary-strength filtering of the fused novelty signal.

``pelt_segment`` dispatches to the compiled kernel when the extension built,
falling back to the pure-Python reference otherwise.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _pelt_py
from .novelty import NoveltySignal

try:
    from . import _speedups as _pelt_impl

    COMPILED_KERNEL = True
except ImportError:  # extension not built; pure path is the contract
    _pelt_impl = _pelt_py
    COMPILED_KERNEL = False

logger = logging.getLogger(__name__)

POOL_RESOLUTIONS = (0.25, 0.5, 1.0)
LAMBDA_FACTORS = (0.5, 1.0, 2.0, 4.0)
STRENGTH_QUANTILE = 0.6


@dataclass(frozen=True)
class PooledSignal:
    resolution_seconds: float
    bin_centers: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class BoundaryCandidate:
    time_seconds: float
    strength: float
    head: str  # "pelt" | "ssm" | "kts"
    detail: str = ""  # debug provenance, e.g. the (resolution, penalty) run


def pool(signal: NoveltySignal, resolution: float) -> PooledSignal:
    """Max-pool onto a fixed grid; empty bins inherit the previous value."""
    if resolution <= 0:
        raise ValueError("resolution must be > 0")
    taus = np.asarray(signal.midpoints, dtype=np.float64)
    vals = np.asarray(signal.values, dtype=np.float64)
    if taus.size == 0:
        raise ValueError("empty signal")
    start = taus[0]
    span = taus[-1] - start
    n_bins = max(1, math.ceil(span / resolution)) if span > 0 else 1
    idx = np.minimum(np.floor((taus - start) / resolution).astype(np.int64), n_bins - 1)
    pooled = np.full(n_bins, -np.inf)
    np.maximum.at(pooled, idx, vals)
    pooled[pooled == -np.inf] = np.nan  # bins no midpoint fell into
    filled = pooled.copy()
    first = np.flatnonzero(~np.isnan(pooled))[0]
    filled[:first] = pooled[first]
    for b in range(first + 1, n_bins):
        if np.isnan(filled[b]):
            filled[b] = filled[b - 1]
    centers = start + (np.arange(n_bins) + 0.5) * resolution
    return PooledSignal(resolution_seconds=resolution, bin_centers=centers, values=filled)


def pelt_segment(values: Sequence[float], penalty: float, min_segment_bins: int) -> list[int]:
    """Optimal change starts for the l2 + penalty-per-change objective."""
    return _pelt_impl.pelt_changes(np.asarray(values, dtype=np.float64), penalty, min_segment_bins)


def pelt_segment_reference(values: Sequence[float], penalty: float, min_segment_bins: int) -> list[int]:
    """Always the pure-Python path (used by the kernel-equivalence tests)."""
    return _pelt_py.pelt_changes(np.asarray(values, dtype=np.float64), penalty, min_segment_bins)


def boundary_strength(values: Sequence[float], index: int, window_bins: int) -> float:
    """|mean after - mean before| with windows truncated at the edges."""
    if window_bins < 1:
        raise ValueError("window_bins must be >= 1")
    x = np.asarray(values, dtype=np.float64)
    left = x[max(0, index - window_bins) : index]
    right = x[index : index + window_bins]
    if left.size == 0 or right.size == 0:
        return 0.0
    return float(abs(right.mean() - left.mean()))


def pelt_head(
    signal: NoveltySignal,
    min_segment_seconds: float,
    duration: float,
    resolutions: Sequence[float] = POOL_RESOLUTIONS,
    lambda_factors: Sequence[float] = LAMBDA_FACTORS,
    strength_quantile: float = STRENGTH_QUANTILE,
) -> list[BoundaryCandidate]:
    """Union of strong PELT boundaries over the (resolution, penalty) sweep.

    Penalties are swept as multiples of the pooled signal's variance so the
    sweep is scale-free; strengths below the per-run quantile are dropped.
    """
    found: dict[float, tuple[float, str]] = {}
    for resolution in resolutions:
        pooled = pool(signal, resolution)
        if pooled.values.size < 2:
            continue
        variance = float(np.var(pooled.values))
        min_bins = max(1, round(min_segment_seconds / resolution))
        window = max(1, round(min_segment_seconds / resolution))
        for factor in lambda_factors:
            penalty = factor * variance
            changes = pelt_segment(pooled.values, penalty, min_bins)
            if not changes:
                continue
            strengths = [boundary_strength(pooled.values, k, window) for k in changes]
            threshold = float(np.quantile(strengths, strength_quantile))
            for k, strength in zip(changes, strengths):
                if strength < threshold:
                    continue
                time = float(pooled.bin_centers[k])
                if not 0.0 < time < duration:
                    continue
                if strength > found.get(time, (-1.0, ""))[0]:
                    found[time] = (strength, f"delta={resolution},lambda={penalty:.4g}")
    return [
        BoundaryCandidate(time_seconds=t, strength=s, head="pelt", detail=detail)
        for t, (s, detail) in sorted(found.items())
    ]


def dump_candidates_csv(path: str | Path, candidates: Sequence[BoundaryCandidate]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_seconds", "strength", "head", "detail"])
        for c in candidates:
            writer.writerow([f"{c.time_seconds:.6f}", f"{c.strength:.6f}", c.head, c.detail])

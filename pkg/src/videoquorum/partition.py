"""Final event blocks: merge head candidates, 1-D NMS, truncate to the
strongest B-1 boundaries, and tile [0, L] into at most B blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .changepoint import BoundaryCandidate

DEFAULT_MAX_BLOCKS = 6
HEAD_ORDER = ("pelt", "ssm", "kts")


@dataclass(frozen=True)
class Partition:
    """Boundaries 0 = b_0 < ... < b_k = L; blocks are half-open intervals."""

    boundaries: tuple[float, ...]
    provenance: tuple[str, ...] = ()  # head per interior boundary

    def __post_init__(self) -> None:
        bs = self.boundaries
        if len(bs) < 2:
            raise ValueError("need at least [0, duration]")
        if bs[0] != 0.0:
            raise ValueError("first boundary must be 0")
        if not all(b > a for a, b in zip(bs, bs[1:])):
            raise ValueError("boundaries must be strictly increasing")
        if self.provenance and len(self.provenance) != len(bs) - 2:
            raise ValueError("provenance must cover interior boundaries")

    @property
    def duration(self) -> float:
        return self.boundaries[-1]

    @property
    def block_count(self) -> int:
        return len(self.boundaries) - 1

    @property
    def blocks(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.boundaries[:-1], self.boundaries[1:]))

    def block_of(self, time: float) -> int:
        """0-based block index for a timestamp in [0, L]."""
        for k, (start, end) in enumerate(self.blocks):
            if start <= time < end:
                return k
        return self.block_count - 1


def min_segment_length(duration: float, floor_seconds: float) -> float:
    if duration <= 0 or floor_seconds <= 0:
        raise ValueError("duration and floor must be positive")
    return max(floor_seconds, duration / 15.0)


def nms_1d(
    candidates: Sequence[BoundaryCandidate],
    min_gap: float,
    duration: float,
    strength_first: bool = False,
) -> list[BoundaryCandidate]:
    """Keep candidates pairwise >= min_gap apart and >= min_gap from both
    video ends. Default priority is scan order (earliest first);
    ``strength_first`` switches to classical strongest-first suppression."""
    ordered = sorted(candidates, key=lambda c: (c.time_seconds, c.head, -c.strength))
    if strength_first:
        ordered = sorted(candidates, key=lambda c: (-c.strength, c.time_seconds, c.head))
    kept: list[BoundaryCandidate] = []
    for cand in ordered:
        t = cand.time_seconds
        if t < min_gap or duration - t < min_gap:
            continue
        if all(abs(t - other.time_seconds) >= min_gap for other in kept):
            kept.append(cand)
    kept.sort(key=lambda c: c.time_seconds)
    return kept


def _normalize_per_head(candidates: Sequence[BoundaryCandidate]) -> dict[int, float]:
    """Min-max strength per head over the video's full candidate set;
    a head whose strengths are all equal maps to 1.0."""
    norm: dict[int, float] = {}
    for head in HEAD_ORDER:
        idxs = [i for i, c in enumerate(candidates) if c.head == head]
        if not idxs:
            continue
        vals = np.array([candidates[i].strength for i in idxs])
        lo, hi = float(vals.min()), float(vals.max())
        for i in idxs:
            norm[i] = 1.0 if hi <= lo else (candidates[i].strength - lo) / (hi - lo)
    return norm


def assemble_partition(
    candidates: Sequence[BoundaryCandidate],
    duration: float,
    min_gap: float,
    max_blocks: int,
    strength_first: bool = False,
) -> Partition:
    """Merge + NMS + truncation: the last stage of event partitioning."""
    if max_blocks < 1:
        raise ValueError("max_blocks must be >= 1")
    if duration <= 0:
        raise ValueError("duration must be positive")
    merged = list(candidates)
    normalized = _normalize_per_head(merged)
    ranked = {id(c): normalized[i] for i, c in enumerate(merged)}
    surviving = nms_1d(merged, min_gap, duration, strength_first=strength_first)
    if len(surviving) > max_blocks - 1:
        by_strength = sorted(
            surviving, key=lambda c: (-ranked[id(c)], c.time_seconds, c.head)
        )
        surviving = sorted(by_strength[: max_blocks - 1], key=lambda c: c.time_seconds)
    boundaries = (0.0, *(c.time_seconds for c in surviving), duration)
    return Partition(boundaries=boundaries, provenance=tuple(c.head for c in surviving))


def uniform_partition(duration: float, max_blocks: int) -> Partition:
    """B equal-width blocks over [0, L]; the query-agnostic baseline."""
    edges = tuple(duration * k / max_blocks for k in range(1, max_blocks))
    return Partition(boundaries=(0.0, *edges, duration), provenance=tuple("uniform" for _ in edges))


def event_partition(
    duration: float,
    pelt_candidates: Sequence[BoundaryCandidate],
    ssm_candidates: Sequence[BoundaryCandidate],
    kts_candidates: Sequence[BoundaryCandidate],
    min_gap: float,
    max_blocks: int = DEFAULT_MAX_BLOCKS,
    strength_first: bool = False,
) -> Partition:
    merged = [*pelt_candidates, *ssm_candidates, *kts_candidates]
    return assemble_partition(merged, duration, min_gap, max_blocks, strength_first)


def ssm_min_gap(min_segment_seconds: float) -> float:
    """The SSM head's minimum peak separation (never below 4 s)."""
    return max(min_segment_seconds, 4.0)


def ssm_half_width(min_segment_seconds: float) -> int:
    """Checkerboard half-width in 1 Hz bins, floored at 4."""
    return max(4, round(min_segment_seconds))


def kts_min_bins(min_segment_seconds: float) -> int:
    """Minimum child size in 1 Hz bins for greedy Gram splitting."""
    return max(1, math.ceil(min_segment_seconds))

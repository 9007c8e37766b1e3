"""Perception/action frame sampling: preview draws, clue-to-block scoring
through a similarity port, and softmax integer allocation of the action
frame budget across retained blocks.

Sampling operates on the source's full frame index space (1-based);
selected frames are decoded on demand through the source loader.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import VideoQuorumError
from .ingest import FrameRecord, VideoSource, decode_frames
from .partition import Partition, uniform_partition
from .util import rng_for

logger = logging.getLogger(__name__)

DEFAULT_PREVIEW_FRAMES = 4
DEFAULT_ACTION_FRAMES = 16
DEFAULT_RETENTION_THRESHOLD = 0.8
SCORING_FRAMES_PER_BLOCK = 4
SCORE_TOP_K = 3
MASKED = -np.inf


@runtime_checkable
class SimilarityPort(Protocol):
    """Scores text against frames; every score lies in [0, 1]."""

    def score(self, text: str, frames: Sequence[FrameRecord]) -> list[float]: ...


class CallableSimilarityPort:
    """Wraps a deterministic (text, frame) -> score function; test scaffolding."""

    def __init__(self, fn) -> None:
        self._fn = fn

    def score(self, text: str, frames: Sequence[FrameRecord]) -> list[float]:
        return [float(self._fn(text, frame)) for frame in frames]


class HashSimilarityPort:
    """Deterministic pseudo-random scores from (seed, text, frame index)."""

    def __init__(self, seed: int = 0) -> None:
        self.seed = seed

    def score(self, text: str, frames: Sequence[FrameRecord]) -> list[float]:
        return [
            float(rng_for("hash-similarity", self.seed, text, f.index).uniform())
            for f in frames
        ]


@dataclass(frozen=True)
class BlockScore:
    """Per-block clue similarity, min-max normalized into [0, 1]."""

    values: np.ndarray
    threshold: float
    normalized: bool = True


@dataclass(frozen=True)
class FrameAllocation:
    counts: np.ndarray  # non-negative ints per block
    total: int


def block_members(partition: Partition, timestamps: Sequence[float]) -> list[list[int]]:
    """1-based frame indices per block, by timestamp membership."""
    ts = np.asarray(timestamps, dtype=np.float64)
    blocks = np.searchsorted(partition.boundaries, ts, side="right") - 1
    blocks = np.clip(blocks, 0, partition.block_count - 1)
    members: list[list[int]] = [[] for _ in range(partition.block_count)]
    for i, b in enumerate(blocks):
        members[b].append(i + 1)
    return members


def sample_p1(
    source: VideoSource,
    n_preview: int,
    mode: str = "random-whole",
    partition: Partition | None = None,
    seed: int = 0,
) -> list[int]:
    """Preview frame indices: uniform without replacement over the whole
    video (default), or round-robin one frame per event block."""
    n = source.frame_count
    if n_preview < 1:
        raise ValueError("n_preview must be >= 1")
    if n_preview > n:
        raise ValueError(f"cannot sample {n_preview} of {n} frames")
    rng = rng_for("p1", seed)
    if mode == "random-whole":
        picks = rng.choice(n, size=n_preview, replace=False) + 1
        return sorted(int(i) for i in picks)
    if mode != "per-event-block":
        raise ValueError(f"unknown p1 mode: {mode}")
    if partition is None:
        raise ValueError("per-event-block sampling needs a partition")
    pools = [list(b) for b in block_members(partition, source.timestamps)]
    chosen: list[int] = []
    while len(chosen) < n_preview:
        progressed = False
        for pool in pools:
            if len(chosen) >= n_preview:
                break
            if not pool:
                continue
            pick = pool.pop(int(rng.integers(len(pool))))
            chosen.append(pick)
            progressed = True
        if not progressed:
            raise VideoQuorumError("exhausted all blocks before reaching n_preview")
    return sorted(chosen)


def score_blocks(
    source: VideoSource,
    partition: Partition,
    clue: str,
    port: SimilarityPort,
    frames_per_block: int = SCORING_FRAMES_PER_BLOCK,
    threshold: float = DEFAULT_RETENTION_THRESHOLD,
    seed: int = 0,
) -> BlockScore:
    """Block relevance to a clue: mean of the top-3 per-frame similarities,
    min-max normalized across blocks. If every block ties, all get 1.0 so
    retention keeps everything; empty blocks score 0 and stay unsampled."""
    if not clue:
        raise ValueError("clue must be non-empty")
    members = block_members(partition, source.timestamps)
    raw = np.full(partition.block_count, MASKED)
    rng = rng_for("score-blocks", seed, clue)
    for k, pool in enumerate(members):
        if not pool:
            continue
        take = min(frames_per_block, len(pool))
        picks = sorted(int(pool[i]) for i in rng.choice(len(pool), size=take, replace=False))
        frames = decode_frames(source, picks)
        sims = np.asarray(port.score(clue, frames), dtype=np.float64)
        top = np.sort(sims)[::-1][: min(SCORE_TOP_K, len(sims))]
        raw[k] = float(top.mean())
    finite = np.isfinite(raw)
    values = np.zeros(partition.block_count)
    if finite.any():
        lo, hi = float(raw[finite].min()), float(raw[finite].max())
        if hi <= lo:
            values[finite] = 1.0
        else:
            values[finite] = (raw[finite] - lo) / (hi - lo)
    return BlockScore(values=values, threshold=threshold)


def allocate_frames(
    scores: BlockScore, n_action: int, threshold: float | None = None, seed: int = 0
) -> FrameAllocation:
    """Integer allocation of the action budget.

    If no block clears the threshold, the whole budget goes to the argmax
    block. Otherwise blocks at or below the threshold are masked out, the
    retained scores are max-shifted and softmaxed, each block gets the
    floor of its share, and the remainder is distributed one frame each to
    seeded-random distinct retained blocks.
    """
    if n_action < 1:
        raise ValueError("n_action must be >= 1")
    rho = scores.threshold if threshold is None else threshold
    s = np.asarray(scores.values, dtype=np.float64)
    counts = np.zeros(len(s), dtype=np.int64)
    if float(s.max()) <= rho:
        counts[int(np.argmax(s))] = n_action
        return FrameAllocation(counts=counts, total=n_action)
    retained = np.flatnonzero(s > rho)
    shifted = s[retained] - float(s[retained].max())
    weights = np.exp(shifted)
    probs = weights / weights.sum()
    base = np.floor(n_action * probs).astype(np.int64)
    counts[retained] = base
    remainder = n_action - int(base.sum())
    if remainder > 0:
        rng = rng_for("allocate", seed)
        extra = rng.choice(len(retained), size=remainder, replace=False)
        counts[retained[extra]] += 1
    return FrameAllocation(counts=counts, total=n_action)


def sample_p2(
    source: VideoSource,
    allocation: FrameAllocation,
    partition: Partition,
    scores: BlockScore | None = None,
    mode: str = "event-blocks",
    max_blocks: int | None = None,
    seed: int = 0,
) -> list[int]:
    """Draw the allocated count inside each block, uniform without
    replacement, returning indices sorted by timestamp.

    A block holding fewer frames than its quota yields everything it has;
    the shortfall moves to the next-highest-scoring retained block with
    spare capacity. If the retained blocks jointly hold fewer frames than
    the budget, the result is clamped to what exists.
    """
    if mode == "uniform-blocks":
        partition = uniform_partition(source.duration_seconds, max_blocks or len(allocation.counts))
    elif mode != "event-blocks":
        raise ValueError(f"unknown p2 mode: {mode}")
    members = block_members(partition, source.timestamps)
    counts = allocation.counts.astype(np.int64).copy()
    if len(counts) != len(members):
        raise ValueError("allocation length does not match block count")
    retained = [k for k in range(len(counts)) if counts[k] > 0]
    order = retained
    if scores is not None:
        order = sorted(retained, key=lambda k: (-scores.values[k], k))
    # move overflow to the best-scoring blocks with room
    shortfall = 0
    for k in retained:
        avail = len(members[k])
        if counts[k] > avail:
            shortfall += int(counts[k] - avail)
            counts[k] = avail
    for k in order:
        if shortfall == 0:
            break
        room = len(members[k]) - int(counts[k])
        if room > 0:
            moved = min(room, shortfall)
            counts[k] += moved
            shortfall -= moved
    if shortfall > 0:
        logger.warning("p2 budget clamped: %d frames short of the request", shortfall)
    rng = rng_for("p2", seed)
    chosen: list[int] = []
    for k, pool in enumerate(members):
        take = int(counts[k])
        if take == 0:
            continue
        picks = rng.choice(len(pool), size=take, replace=False)
        chosen.extend(pool[i] for i in picks)
    return sorted(chosen, key=lambda i: source.timestamps[i - 1])

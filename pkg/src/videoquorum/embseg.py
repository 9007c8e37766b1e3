"""Embedding-sequence heads: checkerboard-kernel novelty on the
self-similarity matrix, and greedy Gram-matrix splitting with an integral
image for O(1) block costs.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .changepoint import BoundaryCandidate
from .novelty import MAD_SCALE
from .util import EPS

KTS_PENALTY = 1.4
SSM_PEAK_QUANTILE = 0.7
GRID_HZ = 1.0


@dataclass(frozen=True)
class EmbeddingGrid:
    """Unit embeddings averaged onto a ~1 Hz grid; empty bins are skipped."""

    times: np.ndarray
    vectors: np.ndarray
    degenerate: np.ndarray  # True where the bin mean cancelled to ~zero

    @property
    def count(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    integral: np.ndarray  # (Q+1, Q+1) prefix-sum table

    @classmethod
    def from_vectors(cls, vectors: np.ndarray) -> "GramMatrix":
        v = np.asarray(vectors, dtype=np.float64)
        entries = v @ v.T
        integral = np.zeros((len(v) + 1, len(v) + 1))
        integral[1:, 1:] = entries.cumsum(axis=0).cumsum(axis=1)
        return cls(entries=entries, integral=integral)

    @property
    def size(self) -> int:
        return len(self.entries)


def resample_embeddings(timestamps: Sequence[float], embeddings: np.ndarray) -> EmbeddingGrid:
    """Mean raw embedding per 1 s bin, unit-normalized; grid times are the
    mean member timestamps of each non-empty bin."""
    t = np.asarray(timestamps, dtype=np.float64)
    e = np.asarray(embeddings, dtype=np.float64)
    if t.size == 0:
        raise ValueError("no frames")
    bins = np.floor((t - t[0]) / GRID_HZ).astype(np.int64)
    times, vectors, degenerate = [], [], []
    for b in np.unique(bins):
        members = bins == b
        mean_vec = e[members].mean(axis=0)
        norm = float(np.linalg.norm(mean_vec))
        times.append(float(t[members].mean()))
        vectors.append(mean_vec / (norm + EPS))
        degenerate.append(norm <= 1e-12)
    return EmbeddingGrid(
        times=np.asarray(times),
        vectors=np.asarray(vectors),
        degenerate=np.asarray(degenerate, dtype=bool),
    )


def checkerboard_kernel(half_width: int, sigma: float | None = None) -> np.ndarray:
    """(2w x 2w) Gaussian-weighted kernel, +1 on the main-diagonal quadrants."""
    if half_width < 1:
        raise ValueError("half_width must be >= 1")
    w = half_width
    if sigma is None:
        sigma = w / 2.0
    offsets = np.arange(2 * w) - (w - 0.5)
    gauss = np.exp(-(offsets[:, None] ** 2 + offsets[None, :] ** 2) / (2.0 * sigma**2))
    signs = np.where((np.arange(2 * w) < w)[:, None] == (np.arange(2 * w) < w)[None, :], 1.0, -1.0)
    return signs * gauss


def novelty_curve(similarity: np.ndarray, half_width: int, kernel: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Kernel correlation along the diagonal; centers c in [w, Q - w)."""
    s = np.asarray(similarity, dtype=np.float64)
    q = len(s)
    w = half_width
    if q < 2 * w + 1:
        return np.empty(0, dtype=np.int64), np.empty(0)
    if kernel is None:
        kernel = checkerboard_kernel(w)
    windows = np.lib.stride_tricks.sliding_window_view(s, (2 * w, 2 * w))
    centers = np.arange(w, q - w)
    out = np.empty(len(centers))
    # extracting diagonal windows copies; chunk so the buffer stays ~32 MB
    # even when the kernel is hundreds of bins wide (hour-long videos)
    chunk = max(1, (1 << 22) // (4 * w * w))
    for start in range(0, len(centers), chunk):
        idx = centers[start : start + chunk] - w
        out[start : start + chunk] = np.einsum("cij,ij->c", windows[idx, idx], kernel)
    return centers, out


def _robust_scores(values: np.ndarray) -> np.ndarray:
    med = float(np.median(values))
    mad = float(np.median(np.abs(values - med)))
    return (values - med) / (MAD_SCALE * mad + EPS)


def foote_novelty(
    grid: EmbeddingGrid,
    half_width_bins: int,
    min_gap_seconds: float,
    peak_quantile: float = SSM_PEAK_QUANTILE,
    gram: GramMatrix | None = None,
) -> list[BoundaryCandidate]:
    """MAD-normalized checkerboard novelty peaks with a minimum pairwise gap.

    Peaks below the quantile threshold are dropped; among close peaks the
    stronger one wins (ties: earlier time). Pass ``gram`` to reuse a
    matrix already built for the Gram-split head.
    """
    if grid.count < 2 * half_width_bins + 1:
        return []
    if gram is None:
        gram = GramMatrix.from_vectors(grid.vectors)
    centers, raw = novelty_curve(gram.entries, half_width_bins)
    if raw.size == 0:
        return []
    # kernel sums over homogeneous stretches cancel only up to float dust;
    # flush it so a zero-MAD curve cannot promote noise to peaks
    dust = 1e-9 * max(1.0, float(np.abs(raw).max()))
    raw = np.where(np.abs(raw) <= dust, 0.0, raw)
    scores = _robust_scores(raw)
    threshold = float(np.quantile(scores, peak_quantile))
    peaks = [
        i
        for i in range(1, len(scores) - 1)
        if scores[i] > scores[i - 1] and scores[i] > scores[i + 1] and scores[i] >= threshold
    ]
    kept: list[tuple[float, float]] = []
    for i in sorted(peaks, key=lambda i: (-scores[i], grid.times[centers[i]])):
        time = float(grid.times[centers[i]])
        if all(abs(time - other) >= min_gap_seconds for other, _ in kept):
            kept.append((time, float(scores[i])))
    return [
        BoundaryCandidate(time_seconds=t, strength=s, head="ssm")
        for t, s in sorted(kept)
    ]


def kts_cost(gram: GramMatrix, a: int, b: int) -> float:
    """Normalized negative block sum over [a, b] x [a, b], O(1) via prefixes."""
    if not 0 <= a <= b < gram.size:
        raise IndexError(f"invalid segment [{a}, {b}] for Q={gram.size}")
    tab = gram.integral
    block = tab[b + 1, b + 1] - tab[a, b + 1] - tab[b + 1, a] + tab[a, a]
    size = b - a + 1
    return -block / (size * size)


def kts_segment(
    gram: GramMatrix,
    times: Sequence[float],
    penalty: float = KTS_PENALTY,
    min_bins: int = 1,
) -> list[BoundaryCandidate]:
    """Greedy recursive splitting: cut where the cost gain (minus penalty)
    is maximal and positive, ties resolved to the smallest index."""
    if gram.size != len(times):
        raise ValueError("times length must match Gram size")
    if min_bins < 1:
        raise ValueError("min_bins must be >= 1")
    cuts: list[tuple[float, float]] = []
    stack = [(0, gram.size - 1)] if gram.size >= 1 else []
    while stack:
        a, b = stack.pop()
        if b - a + 1 < 2 * min_bins:
            continue
        whole = kts_cost(gram, a, b)
        best_gain = -math.inf
        best_k = -1
        for k in range(a + min_bins - 1, b - min_bins + 1):
            gain = whole - (kts_cost(gram, a, k) + kts_cost(gram, k + 1, b)) - penalty
            if gain > best_gain:
                best_gain = gain
                best_k = k
        if best_k < 0 or best_gain <= 0:
            continue
        cuts.append((float(times[best_k + 1]), best_gain))
        stack.append((best_k + 1, b))
        stack.append((a, best_k))
    return [
        BoundaryCandidate(time_seconds=t, strength=g, head="kts")
        for t, g in sorted(cuts)
    ]


def write_pgm(path: str | Path, matrix: np.ndarray) -> None:
    """Debug dump of a matrix (e.g. the SSM) as a binary PGM image."""
    m = np.asarray(matrix, dtype=np.float64)
    lo, hi = float(m.min()), float(m.max())
    scaled = np.zeros_like(m) if hi <= lo else (m - lo) / (hi - lo)
    pixels = (scaled * 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{pixels.shape[1]} {pixels.shape[0]}\n255\n".encode())
        fh.write(pixels.tobytes())


def dump_novelty_csv(path: str | Path, times: np.ndarray, scores: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time_seconds", "novelty"])
        for t, s in zip(times, scores):
            writer.writerow([f"{t:.6f}", f"{s:.6f}"])

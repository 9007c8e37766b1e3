"""Per-frame descriptors: HSV histograms, sharpness, motion, embeddings.

All pixel cues are computed on a copy downscaled so the longer side is at
most 256 px; gray-scale conversion uses the 0.299/0.587/0.114 luma weights.
Embeddings come through an :class:`EmbedderPort` so the engine never loads a
model in-process.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np
from PIL import Image

from .errors import PortContractError
from .ingest import FrameRecord
from .util import EPS, rng_for

HIST_BINS = 32
FEATURE_SIDE = 256


@dataclass(frozen=True)
class ColorDescriptor:
    """Jointly l1-normalized H/S/V histograms (32 bins each)."""

    hist_h: np.ndarray
    hist_s: np.ndarray
    hist_v: np.ndarray

    @property
    def concatenated(self) -> np.ndarray:
        return np.concatenate([self.hist_h, self.hist_s, self.hist_v])


@dataclass(frozen=True)
class FrameFeatures:
    color: ColorDescriptor
    sharpness: float
    motion: float
    embedding: np.ndarray
    embedding_unit: np.ndarray


@dataclass(frozen=True)
class FeatureSet:
    """Columnar features for a decoded frame sequence."""

    timestamps: np.ndarray
    colors: tuple[ColorDescriptor, ...]
    sharpness: np.ndarray
    motion: np.ndarray
    embeddings: np.ndarray
    unit_embeddings: np.ndarray

    def __len__(self) -> int:
        return len(self.colors)

    def frame(self, i: int) -> FrameFeatures:
        return FrameFeatures(
            color=self.colors[i],
            sharpness=float(self.sharpness[i]),
            motion=float(self.motion[i]),
            embedding=self.embeddings[i],
            embedding_unit=self.unit_embeddings[i],
        )


def downscale(pixels: np.ndarray, longest_side: int = FEATURE_SIDE) -> np.ndarray:
    h, w = pixels.shape[:2]
    longer = max(h, w)
    if longer <= longest_side:
        return pixels
    scale = longest_side / longer
    new_w = max(1, round(w * scale))
    new_h = max(1, round(h * scale))
    img = Image.fromarray(pixels).resize((new_w, new_h), Image.BILINEAR)
    return np.asarray(img, dtype=np.uint8)


def to_gray(pixels: np.ndarray) -> np.ndarray:
    arr = pixels.astype(np.float64)
    return 0.299 * arr[..., 0] + 0.587 * arr[..., 1] + 0.114 * arr[..., 2]


def rgb_to_hsv(pixels: np.ndarray) -> np.ndarray:
    """Vectorized RGB -> HSV with every channel mapped into [0, 1].

    float32 internally: histograms quantize to 32 bins, far above the
    precision this costs, and it halves the conversion time.
    """
    arr = pixels.astype(np.float32) / np.float32(255.0)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    spread = maxc - minc
    value = maxc
    sat = np.where(maxc > 0, spread / np.where(maxc > 0, maxc, 1.0), 0.0)
    safe = np.where(spread > 0, spread, 1.0)
    is_r = maxc == r
    is_g = ~is_r & (maxc == g)
    num = np.select([is_r, is_g], [g - b, b - r], default=r - g)
    offset = np.select([is_r, is_g], [np.float32(0.0), np.float32(2.0)], default=np.float32(4.0))
    hue = ((num / safe + offset) / np.float32(6.0)) % np.float32(1.0)
    hue = np.where(spread > 0, hue, 0.0)
    return np.stack([hue, sat, value], axis=-1)


def _channel_hist(values: np.ndarray, bins: int = HIST_BINS) -> np.ndarray:
    idx = np.minimum((values * bins).astype(np.int64), bins - 1)
    return np.bincount(idx.ravel(), minlength=bins).astype(np.float64)


def _descriptor_from_hsv(hsv: np.ndarray) -> ColorDescriptor:
    hist_h = _channel_hist(hsv[..., 0])
    hist_s = _channel_hist(hsv[..., 1])
    hist_v = _channel_hist(hsv[..., 2])
    total = hist_h.sum() + hist_s.sum() + hist_v.sum() + EPS
    return ColorDescriptor(hist_h / total, hist_s / total, hist_v / total)


def hsv_histogram(frame: FrameRecord) -> ColorDescriptor:
    """32-bin histograms per HSV channel, jointly l1-normalized."""
    return _descriptor_from_hsv(rgb_to_hsv(downscale(frame.pixels)))


def laplacian(gray: np.ndarray) -> np.ndarray:
    """3x3 four-neighbor Laplacian (center -4) with replicate borders."""
    p = np.pad(gray, 1, mode="edge")
    return p[:-2, 1:-1] + p[2:, 1:-1] + p[1:-1, :-2] + p[1:-1, 2:] - 4.0 * gray


def sharpness(frame: FrameRecord) -> float:
    gray = to_gray(downscale(frame.pixels))
    return float(np.var(laplacian(gray)))


def motion(prev: FrameRecord, curr: FrameRecord) -> float:
    """Median absolute gray-level difference, scaled into [0, 1]."""
    a = to_gray(downscale(prev.pixels))
    b = to_gray(downscale(curr.pixels))
    if a.shape != b.shape:
        raise ValueError(f"raster shapes differ after downscale: {a.shape} vs {b.shape}")
    return float(np.median(np.abs(b - a))) / 255.0


@runtime_checkable
class EmbedderPort(Protocol):
    """Maps frames to fixed-dimension feature vectors."""

    dimension: int

    def embed(self, frames: Sequence[FrameRecord]) -> np.ndarray: ...


class SyntheticEmbedderPort:
    """Deterministic pseudo-random unit vector per (frame index, seed)."""

    def __init__(self, dimension: int = 384, seed: int = 0) -> None:
        self.dimension = dimension
        self.seed = seed

    def embed(self, frames: Sequence[FrameRecord]) -> np.ndarray:
        out = np.empty((len(frames), self.dimension))
        for i, frame in enumerate(frames):
            v = rng_for("synthetic-embed", self.seed, frame.index).standard_normal(self.dimension)
            out[i] = v / (np.linalg.norm(v) + EPS)
        return out


class SegmentEmbedderPort:
    """Piecewise-constant embeddings: one shared vector per configured segment.

    The oracle substrate for self-similarity and Gram-segmentation tests;
    ``orthogonal=True`` assigns exact basis vectors per segment.
    """

    def __init__(
        self,
        dimension: int,
        boundaries: Sequence[float],
        seed: int = 0,
        orthogonal: bool = False,
    ) -> None:
        self.dimension = dimension
        self.boundaries = tuple(sorted(boundaries))
        self.seed = seed
        self.orthogonal = orthogonal

    def _segment_vector(self, segment: int) -> np.ndarray:
        if self.orthogonal:
            v = np.zeros(self.dimension)
            v[segment % self.dimension] = 1.0
            return v
        v = rng_for("segment-embed", self.seed, segment).standard_normal(self.dimension)
        return v / (np.linalg.norm(v) + EPS)

    def embed(self, frames: Sequence[FrameRecord]) -> np.ndarray:
        out = np.empty((len(frames), self.dimension))
        for i, frame in enumerate(frames):
            seg = bisect.bisect_right(self.boundaries, frame.timestamp_seconds)
            out[i] = self._segment_vector(seg)
        return out


def unit_normalize(vectors: np.ndarray, eps: float = EPS) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / (norms + eps)


def embed_frames(frames: Sequence[FrameRecord], port: EmbedderPort) -> tuple[np.ndarray, np.ndarray]:
    """Raw and unit-normalized embeddings, one row per frame, order kept."""
    vectors = np.asarray(port.embed(frames), dtype=np.float64)
    if vectors.shape != (len(frames), port.dimension):
        raise PortContractError(
            f"embedder returned shape {vectors.shape}, expected {(len(frames), port.dimension)}"
        )
    if not np.all(np.isfinite(vectors)):
        raise PortContractError("embedder returned non-finite values")
    return vectors, unit_normalize(vectors)


def compute_features(frames: Sequence[FrameRecord], port: EmbedderPort) -> FeatureSet:
    """Full per-frame descriptor set; motion of the first frame is 0."""
    if not frames:
        raise ValueError("no frames")
    colors = []
    sharp = np.zeros(len(frames))
    motions = np.zeros(len(frames))
    prev_gray: np.ndarray | None = None
    for i, frame in enumerate(frames):
        small = downscale(frame.pixels)
        colors.append(_descriptor_from_hsv(rgb_to_hsv(small)))
        gray = to_gray(small)
        sharp[i] = np.var(laplacian(gray))
        if prev_gray is not None:
            if gray.shape != prev_gray.shape:
                raise ValueError("raster shapes differ between consecutive frames")
            motions[i] = float(np.median(np.abs(gray - prev_gray))) / 255.0
        prev_gray = gray
    embeddings, units = embed_frames(frames, port)
    return FeatureSet(
        timestamps=np.asarray([f.timestamp_seconds for f in frames], dtype=np.float64),
        colors=tuple(colors),
        sharpness=sharp,
        motion=motions,
        embeddings=embeddings,
        unit_embeddings=units,
    )

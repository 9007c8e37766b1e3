"""Fused novelty signal on temporal midpoints.

Per-cue novelties (color, motion, sharpness, embedding) are standardized
with a MAD-robust z-score, smoothed with a short truncated moving average,
clipped to [-4, 4], and fused with variance-scaled base weights; the fused
series gets one more smoothing pass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import ColorDescriptor, FeatureSet
from .util import EPS, cosine_distance, moving_average

COLOR_WEIGHTS = (0.55, 0.35, 0.10)  # hue, saturation, value
EMA_DECAY = 0.9
MAD_SCALE = 1.4826  # 1 / Phi^-1(0.75): makes MAD a consistent sigma estimate
SMOOTH_WINDOW = 5
CLIP = 4.0
BASE_WEIGHTS = {"color": 0.20, "motion": 0.30, "embedding": 0.35, "sharpness": 0.05}
CUE_ORDER = ("color", "motion", "embedding", "sharpness")


@dataclass(frozen=True)
class CueSeries:
    """Per-step novelty for one cue, indexed r = 2..N (length N - 1)."""

    cue: str
    values: np.ndarray


@dataclass(frozen=True)
class NoveltySignal:
    midpoints: np.ndarray
    values: np.ndarray
    fusion_weights: np.ndarray  # order: color, motion, embedding, sharpness


def midpoints(timestamps: Sequence[float]) -> np.ndarray:
    t = np.asarray(timestamps, dtype=np.float64)
    return (t[:-1] + t[1:]) / 2.0


def color_novelty(descriptors: Sequence[ColorDescriptor]) -> CueSeries:
    """Weighted per-channel cosine distances between consecutive histograms."""
    if len(descriptors) < 2:
        raise ValueError("need at least 2 descriptors")
    wh, ws, wv = COLOR_WEIGHTS
    values = np.empty(len(descriptors) - 1)
    for r in range(1, len(descriptors)):
        prev, curr = descriptors[r - 1], descriptors[r]
        values[r - 1] = (
            wh * cosine_distance(curr.hist_h, prev.hist_h)
            + ws * cosine_distance(curr.hist_s, prev.hist_s)
            + wv * cosine_distance(curr.hist_v, prev.hist_v)
        )
    return CueSeries(cue="color", values=values)


def sharpness_novelty(sharpness: np.ndarray) -> CueSeries:
    return CueSeries(cue="sharpness", values=np.abs(np.diff(np.asarray(sharpness, dtype=np.float64))))


def motion_novelty(motion: np.ndarray) -> CueSeries:
    return CueSeries(cue="motion", values=np.abs(np.diff(np.asarray(motion, dtype=np.float64))))


def embedding_ema(embeddings: np.ndarray, decay: float = EMA_DECAY) -> np.ndarray:
    """Forward EMA over raw embeddings, state seeded with the first vector."""
    e = np.asarray(embeddings, dtype=np.float64)
    out = np.empty_like(e)
    out[0] = e[0]
    for r in range(1, len(e)):
        out[r] = decay * out[r - 1] + (1.0 - decay) * e[r]
    return out


def embedding_novelty(embeddings: np.ndarray, decay: float = EMA_DECAY) -> CueSeries:
    """Mean of distance-to-previous and distance-to-prefix-EMA per step."""
    e = np.asarray(embeddings, dtype=np.float64)
    if e.ndim != 2 or len(e) < 2:
        raise ValueError("need a (N, D) array with N >= 2")
    norms = np.linalg.norm(e, axis=1, keepdims=True)
    units = e / (norms + EPS)
    ema = embedding_ema(e, decay)
    ema_units = ema / (np.linalg.norm(ema, axis=1, keepdims=True) + EPS)
    values = np.empty(len(e) - 1)
    for r in range(1, len(e)):
        d_prev = cosine_distance(units[r], units[r - 1])
        d_ema = cosine_distance(units[r], ema_units[r - 1])
        values[r - 1] = 0.5 * d_prev + 0.5 * d_ema
    return CueSeries(cue="embedding", values=values)


def robust_z(series: CueSeries, window: int = SMOOTH_WINDOW) -> CueSeries:
    """MAD z-score, truncated moving average, then clip to [-4, 4]."""
    x = np.asarray(series.values, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty series")
    med = float(np.median(x))
    mad = float(np.median(np.abs(x - med)))
    z = (x - med) / (MAD_SCALE * mad + EPS)
    smoothed = moving_average(z, window)
    return CueSeries(cue=series.cue, values=np.clip(smoothed, -CLIP, CLIP))


def fuse(
    midpoints: np.ndarray,
    z_col: CueSeries,
    z_mot: CueSeries,
    z_emb: CueSeries,
    z_shp: CueSeries,
    window: int = SMOOTH_WINDOW,
) -> NoveltySignal:
    """Variance-scaled convex fusion of the four cue series plus smoothing.

    Weights are beta_c * sigma_c renormalized to sum 1; if every cue has
    zero spread the base weights are renormalized instead so the (all-zero)
    signal stays defined.
    """
    by_cue = {"color": z_col, "motion": z_mot, "embedding": z_emb, "sharpness": z_shp}
    lengths = {len(s.values) for s in by_cue.values()}
    if len(lengths) != 1:
        raise ValueError("cue series lengths differ")
    if next(iter(lengths)) != len(midpoints):
        raise ValueError("midpoint count does not match series length")
    sigmas = np.array([float(np.std(by_cue[c].values)) for c in CUE_ORDER])
    betas = np.array([BASE_WEIGHTS[c] for c in CUE_ORDER])
    scaled = betas * sigmas
    total = scaled.sum()
    weights = scaled / total if total > 0 else betas / betas.sum()
    stacked = np.vstack([by_cue[c].values for c in CUE_ORDER])
    fused = weights @ stacked
    return NoveltySignal(
        midpoints=np.asarray(midpoints, dtype=np.float64),
        values=moving_average(fused, window),
        fusion_weights=weights,
    )


def compute_novelty(
    features: FeatureSet, window: int = SMOOTH_WINDOW
) -> tuple[NoveltySignal, dict[str, CueSeries]]:
    """Full cue -> z -> fuse pipeline over a feature set (needs >= 2 frames)."""
    if len(features) < 2:
        raise ValueError("need at least 2 frames")
    cues = {
        "color": robust_z(color_novelty(features.colors), window),
        "motion": robust_z(motion_novelty(features.motion), window),
        "embedding": robust_z(embedding_novelty(features.embeddings), window),
        "sharpness": robust_z(sharpness_novelty(features.sharpness), window),
    }
    signal = fuse(
        midpoints(features.timestamps),
        cues["color"],
        cues["motion"],
        cues["embedding"],
        cues["sharpness"],
        window,
    )
    return signal, cues


def dump_csv(path: str | Path, signal: NoveltySignal, cues: dict[str, CueSeries]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["midpoint", "z_color", "z_motion", "z_embedding", "z_sharpness", "fused"])
        for i, tau in enumerate(signal.midpoints):
            writer.writerow(
                [f"{tau:.6f}"]
                + [f"{cues[c].values[i]:.6f}" for c in CUE_ORDER]
                + [f"{signal.values[i]:.6f}"]
            )

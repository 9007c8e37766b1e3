"""Deterministic synthetic clips for tests and mock benchmarks.

A synthetic source is a piecewise-scene video: each scene has a base color
drawn from a seeded generator, plus a drifting gradient and light per-frame
noise so motion/sharpness cues are non-trivial. Everything is a pure
function of (seed, frame index), so re-opening the same ``synth://`` URI
reproduces identical pixels.
"""

from __future__ import annotations

import bisect

import numpy as np

from .ingest import VideoSource
from .util import derive_seed, rng_for


def synthetic_source(
    identifier: str,
    duration: float,
    frame_count: int,
    cut_times: tuple[float, ...] = (),
    seed: int = 0,
    height: int = 48,
    width: int = 64,
) -> VideoSource:
    if frame_count < 1:
        raise ValueError("frame_count must be >= 1")
    if frame_count == 1:
        timestamps = (0.0,)
    else:
        timestamps = tuple(duration * i / (frame_count - 1) for i in range(frame_count))
    cuts = tuple(sorted(cut_times))
    scene_colors = []
    for k in range(len(cuts) + 1):
        rng = rng_for("synth-scene", seed, k)
        scene_colors.append(rng.uniform(40.0, 215.0, size=3))

    xx = np.arange(width, dtype=np.float32) / max(width - 1, 1)
    # sin(2*pi*(g + c*i)) expanded via the angle-sum identity so decoding a
    # frame costs two scalar trig calls instead of a full-size sin
    sin_g = np.sin(2.0 * np.pi * xx)[None, :, None]
    cos_g = np.cos(2.0 * np.pi * xx)[None, :, None]
    def load(index: int) -> np.ndarray:
        t = timestamps[index - 1]
        scene = bisect.bisect_right(cuts, t)
        base = scene_colors[scene].astype(np.float32)
        # smoothly drifting gradient gives consecutive frames a small, steady change
        angle = 2.0 * np.pi * index * 0.02
        wave = sin_g * np.float32(np.cos(angle)) + cos_g * np.float32(np.sin(angle))
        img = base[None, None, :] * (0.75 + 0.125 * (1.0 + wave))
        # fresh iid sensor noise per frame keeps every cue's baseline spread
        # healthy (the robust z-score divides by it); single-channel float32
        # through SFC64 keeps decoding cheap. The scalar exposure dither
        # de-quantizes the uint8 rounding so the motion cue's median-based
        # baseline varies continuously instead of sitting on a lattice.
        rng = np.random.Generator(np.random.SFC64(derive_seed("synth-noise", seed, index)))
        noise = rng.standard_normal((height, width, 1), dtype=np.float32) * np.float32(2.0)
        dither = np.float32(rng.uniform(-1.5, 1.5))
        return np.clip(img + noise + dither, 0, 255).astype(np.uint8)

    return VideoSource(
        identifier=identifier,
        duration_seconds=duration,
        frame_count=frame_count,
        timestamps=timestamps,
        loader=load,
    )


def synthetic_uri(
    duration: float,
    frames: int,
    cuts: tuple[float, ...] = (),
    seed: int = 0,
    size: str = "48x64",
) -> str:
    parts = [f"duration={duration}", f"frames={frames}", f"seed={seed}", f"size={size}"]
    if cuts:
        parts.append("cuts=" + ",".join(str(c) for c in cuts))
    return "synth://clip?" + "&".join(parts)


def write_frame_directory(source: VideoSource, root, indices=None) -> None:
    """Materialize a source as the canonical on-disk directory layout."""
    from pathlib import Path

    from PIL import Image

    rootp = Path(root)
    rootp.mkdir(parents=True, exist_ok=True)
    pad = len(str(source.frame_count))
    for index in indices or range(1, source.frame_count + 1):
        ts_ms = int(round(source.timestamps[index - 1] * 1000))
        name = f"{index:0{pad}d}_{ts_ms}.png"
        Image.fromarray(source.loader(index)).save(rootp / name)
    import json

    (rootp / "meta.json").write_text(
        json.dumps({"duration_seconds": source.duration_seconds})
    )

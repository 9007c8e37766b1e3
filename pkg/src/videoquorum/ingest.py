"""Frame sources: directory layouts, container files, and synthetic clips.

A source provides metadata up front (duration, frame count, timestamps) and
decodes pixel data lazily per frame index. The canonical deterministic path
is a directory of image files named ``<zero-padded-index>_<timestamp-ms>.png``
with an optional ``meta.json`` carrying the duration; container files are
handled by an adapter that shells out to ffprobe/ffmpeg.
"""

from __future__ import annotations

import json
import re
import subprocess
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence
from urllib.parse import parse_qs, urlparse

import numpy as np
from PIL import Image

from .errors import IngestError

_FRAME_NAME = re.compile(r"^(\d+)_(\d+)\.(png|jpg|jpeg)$", re.IGNORECASE)

#: decoded frames are capped at this many pixels on the longer side before
#: feature computation; decoding itself returns full resolution.
FrameLoader = Callable[[int], np.ndarray]


@dataclass(frozen=True)
class VideoSource:
    """Metadata for an openable video; pixel decoding stays lazy."""

    identifier: str
    duration_seconds: float
    frame_count: int
    timestamps: tuple[float, ...]
    loader: FrameLoader = field(repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.duration_seconds <= 0:
            raise IngestError(f"{self.identifier}: non-positive duration")
        if self.frame_count < 1:
            raise IngestError(f"{self.identifier}: zero frames")
        ts = np.asarray(self.timestamps)
        if ts.size != self.frame_count:
            raise IngestError(f"{self.identifier}: timestamp count mismatch")
        if ts.size > 1 and not np.all(np.diff(ts) > 0):
            raise IngestError(f"{self.identifier}: timestamps not strictly increasing")


@dataclass(frozen=True)
class FrameRecord:
    """One decoded frame; ``index`` is 1-based within the source."""

    index: int
    timestamp_seconds: float
    pixels: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class SampleGrid:
    indices: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.indices)


def open_source(path: str | Path) -> VideoSource:
    """Open a frame directory, a video container, or a ``synth://`` clip."""
    text = str(path)
    if text.startswith("synth://"):
        return _open_synthetic(text)
    p = Path(path)
    if not p.exists():
        raise IngestError(f"unreadable path: {p}")
    if p.is_dir():
        return _open_directory(p)
    return _open_container(p)


def _open_directory(root: Path) -> VideoSource:
    entries: list[tuple[int, float, Path]] = []
    for child in sorted(root.iterdir()):
        m = _FRAME_NAME.match(child.name)
        if m:
            entries.append((int(m.group(1)), int(m.group(2)) / 1000.0, child))
    if not entries:
        raise IngestError(f"{root}: zero frames")
    entries.sort(key=lambda e: e[0])
    timestamps = tuple(ts for _, ts, _ in entries)
    if len(timestamps) > 1 and not all(b > a for a, b in zip(timestamps, timestamps[1:])):
        raise IngestError(f"{root}: frame timestamps not strictly increasing")
    duration = timestamps[-1] if timestamps[-1] > 0 else 1e-3
    meta = root / "meta.json"
    if meta.exists():
        try:
            payload = json.loads(meta.read_text())
        except json.JSONDecodeError as exc:
            raise IngestError(f"{meta}: invalid meta.json: {exc}") from exc
        duration = float(payload.get("duration_seconds", duration))
    paths = [p for _, _, p in entries]

    def load(index: int) -> np.ndarray:
        try:
            with Image.open(paths[index - 1]) as img:
                return np.asarray(img.convert("RGB"), dtype=np.uint8)
        except OSError as exc:
            raise IngestError(f"{root}: cannot decode frame {index}: {exc}") from exc

    return VideoSource(
        identifier=str(root),
        duration_seconds=duration,
        frame_count=len(entries),
        timestamps=timestamps,
        loader=load,
    )


def _open_container(path: Path) -> VideoSource:
    """Container adapter: metadata via ffprobe, pixels via ffmpeg."""
    if shutil.which("ffprobe") is None or shutil.which("ffmpeg") is None:
        raise IngestError(
            f"{path}: container decoding needs ffprobe/ffmpeg on PATH; "
            "use a frame directory otherwise"
        )
    cmd = [
        "ffprobe", "-v", "error", "-select_streams", "v:0",
        "-count_packets", "-show_entries",
        "stream=nb_read_packets,duration,avg_frame_rate",
        "-of", "json", str(path),
    ]
    try:
        out = subprocess.run(cmd, capture_output=True, check=True, text=True).stdout
    except subprocess.CalledProcessError as exc:
        raise IngestError(f"{path}: undecodable container: {exc.stderr}") from exc
    try:
        stream = json.loads(out)["streams"][0]
        n = int(stream["nb_read_packets"])
        duration = float(stream["duration"])
    except (KeyError, IndexError, ValueError) as exc:
        raise IngestError(f"{path}: ffprobe output missing stream data") from exc
    if n < 1:
        raise IngestError(f"{path}: zero frames")
    timestamps = tuple(duration * i / n for i in range(n))

    def load(index: int) -> np.ndarray:
        sel = ["-vf", f"select=eq(n\\,{index - 1})", "-vframes", "1"]
        cmd = ["ffmpeg", "-v", "error", "-i", str(path), *sel,
               "-f", "image2pipe", "-vcodec", "png", "-"]
        try:
            raw = subprocess.run(cmd, capture_output=True, check=True).stdout
            import io

            with Image.open(io.BytesIO(raw)) as img:
                return np.asarray(img.convert("RGB"), dtype=np.uint8)
        except (subprocess.CalledProcessError, OSError) as exc:
            raise IngestError(f"{path}: cannot decode frame {index}: {exc}") from exc

    return VideoSource(
        identifier=str(path),
        duration_seconds=duration,
        frame_count=n,
        timestamps=timestamps,
        loader=load,
    )


def _open_synthetic(uri: str) -> VideoSource:
    from . import synth

    parsed = urlparse(uri)
    params = {k: v[-1] for k, v in parse_qs(parsed.query).items()}
    cuts = tuple(float(c) for c in params["cuts"].split(",")) if params.get("cuts") else ()
    size = params.get("size", "48x64")
    height, width = (int(v) for v in size.split("x"))
    return synth.synthetic_source(
        identifier=uri,
        duration=float(params.get("duration", 60.0)),
        frame_count=int(params.get("frames", 120)),
        cut_times=cuts,
        seed=int(params.get("seed", 0)),
        height=height,
        width=width,
    )


def uniform_sample(source: VideoSource, max_frames: int) -> SampleGrid:
    """Evenly spaced 1-based indices: all frames when n <= max_frames,
    otherwise max_frames indices with first=1 and last=n."""
    if max_frames < 2:
        raise ValueError("max_frames must be >= 2")
    n = source.frame_count
    if n <= max_frames:
        return SampleGrid(indices=tuple(range(1, n + 1)))
    positions = np.linspace(1, n, max_frames)
    indices = np.rint(positions).astype(np.int64)
    return SampleGrid(indices=tuple(int(i) for i in indices))


def decode_frames(source: VideoSource, grid: SampleGrid | Sequence[int]) -> list[FrameRecord]:
    indices = grid.indices if isinstance(grid, SampleGrid) else tuple(grid)
    records = []
    for index in indices:
        if not 1 <= index <= source.frame_count:
            raise IngestError(f"{source.identifier}: frame index {index} out of range")
        pixels = source.loader(index)
        records.append(
            FrameRecord(
                index=index,
                timestamp_seconds=source.timestamps[index - 1],
                pixels=pixels,
            )
        )
    return records

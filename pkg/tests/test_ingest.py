from __future__ import annotations

import json

import numpy as np
import pytest
from PIL import Image

from videoquorum.errors import IngestError
from videoquorum.ingest import decode_frames, open_source, uniform_sample
from videoquorum.synth import synthetic_source, write_frame_directory


def _write_frames(root, count: int, span_ms: int, shape=(8, 10)) -> None:
    root.mkdir(parents=True, exist_ok=True)
    for i in range(1, count + 1):
        ts = round((i - 1) * span_ms / (count - 1)) if count > 1 else 0
        pixels = np.full((*shape, 3), (i * 7) % 256, dtype=np.uint8)
        Image.fromarray(pixels).save(root / f"{i:04d}_{ts}.png")


def test_open_directory_metadata(tmp_path):
    _write_frames(tmp_path / "frames", count=150, span_ms=25_000)
    source = open_source(tmp_path / "frames")
    assert source.frame_count == 150
    assert source.duration_seconds == 25.0
    assert source.timestamps[0] == 0.0
    assert source.timestamps[-1] == 25.0


def test_meta_json_duration_wins(tmp_path):
    root = tmp_path / "frames"
    _write_frames(root, count=10, span_ms=9_000)
    (root / "meta.json").write_text(json.dumps({"duration_seconds": 12.5}))
    assert open_source(root).duration_seconds == 12.5


def test_empty_directory_errors(tmp_path):
    (tmp_path / "empty").mkdir()
    with pytest.raises(IngestError, match="zero frames"):
        open_source(tmp_path / "empty")


def test_missing_path_errors(tmp_path):
    with pytest.raises(IngestError, match="unreadable"):
        open_source(tmp_path / "nope")


def test_uniform_sample_passthrough(small_source):
    grid = uniform_sample(small_source, 200)
    assert grid.indices == tuple(range(1, 41))


def test_uniform_sample_two_frames():
    source = synthetic_source("two", duration=1.0, frame_count=2)
    assert uniform_sample(source, 2).indices == (1, 2)


def test_uniform_sample_spacing_oracle():
    # direct enumeration: endpoints pinned, gaps differ by at most one step
    source = synthetic_source("dense", duration=180.0, frame_count=5400)
    grid = uniform_sample(source, 200)
    indices = np.array(grid.indices)
    assert len(indices) == 200
    assert indices[0] == 1 and indices[-1] == 5400
    gaps = np.diff(indices)
    assert gaps.min() >= 1
    assert gaps.max() - gaps.min() <= 1


def test_uniform_sample_is_deterministic(small_source):
    assert uniform_sample(small_source, 7).indices == uniform_sample(small_source, 7).indices


def test_uniform_sample_rejects_tiny_budget(small_source):
    with pytest.raises(ValueError):
        uniform_sample(small_source, 1)


def test_decode_preserves_order_and_timestamps(tmp_path):
    _write_frames(tmp_path / "frames", count=12, span_ms=11_000)
    source = open_source(tmp_path / "frames")
    grid = uniform_sample(source, 5)
    frames = decode_frames(source, grid)
    assert [f.index for f in frames] == list(grid.indices)
    ts = [f.timestamp_seconds for f in frames]
    assert all(b > a for a, b in zip(ts, ts[1:]))
    assert frames[0].pixels.shape == (8, 10, 3)


def test_decode_failure_reports_index(tmp_path):
    root = tmp_path / "frames"
    _write_frames(root, count=3, span_ms=2_000)
    bad = sorted(root.glob("*.png"))[1]
    bad.write_bytes(b"not a png")
    source = open_source(root)
    with pytest.raises(IngestError, match="frame 2"):
        decode_frames(source, [2])


def test_round_trip_through_directory(tmp_path, small_source):
    write_frame_directory(small_source, tmp_path / "clip")
    reopened = open_source(tmp_path / "clip")
    assert reopened.frame_count == small_source.frame_count
    assert reopened.duration_seconds == small_source.duration_seconds
    original = small_source.loader(5)
    decoded = decode_frames(reopened, [5])[0].pixels
    np.testing.assert_array_equal(original, decoded)


def test_synth_uri_round_trip():
    source = open_source("synth://clip?duration=30&frames=60&seed=4&cuts=15")
    assert source.frame_count == 60
    assert source.duration_seconds == 30.0
    a = source.loader(10)
    b = open_source("synth://clip?duration=30&frames=60&seed=4&cuts=15").loader(10)
    np.testing.assert_array_equal(a, b)


@pytest.mark.skipif(
    __import__("shutil").which("ffprobe") is None or __import__("shutil").which("ffmpeg") is None,
    reason="container decoding needs ffmpeg/ffprobe",
)
def test_container_file_metadata(tmp_path):
    import subprocess

    clip = tmp_path / "clip.mp4"
    subprocess.run(
        ["ffmpeg", "-v", "error", "-f", "lavfi", "-i", "testsrc=duration=2:size=64x48:rate=10",
         str(clip)],
        check=True,
    )
    source = open_source(clip)
    assert source.frame_count == 20
    assert source.duration_seconds == pytest.approx(2.0, abs=0.2)
    frame = decode_frames(source, [1])[0]
    assert frame.pixels.shape == (48, 64, 3)


def test_container_without_ffmpeg_reports_clearly(tmp_path, monkeypatch):
    target = tmp_path / "clip.mp4"
    target.write_bytes(b"\x00\x00\x00\x18ftypmp42")
    monkeypatch.setenv("PATH", str(tmp_path))
    with pytest.raises(IngestError, match="ffprobe/ffmpeg"):
        open_source(target)

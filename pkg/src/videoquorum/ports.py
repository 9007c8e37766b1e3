"""HTTP-backed model ports and the shared wire-contract checks.

The engine consumes two remote roles: frame embeddings (POST /v1/embed)
and text-vs-frame similarity (POST /v1/similarity). Both payloads carry
base64 PNG images. The ``verify_*_contract`` helpers are the one set of
contract assertions run against both these clients and the synthetic ports.
"""

from __future__ import annotations

import base64
import io
import time
from typing import Sequence

import httpx
import numpy as np
from PIL import Image

from .errors import PortContractError, TransportFailure
from .ingest import FrameRecord

RETRYABLE = (httpx.TransportError,)


def encode_frame_png(frame: FrameRecord) -> str:
    buf = io.BytesIO()
    Image.fromarray(frame.pixels).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class _RemotePort:
    def __init__(
        self,
        base_url: str = "",
        client: httpx.Client | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        backoff_seconds: float = 0.2,
    ) -> None:
        self._client = client or httpx.Client(base_url=base_url, timeout=timeout)
        self._max_retries = max_retries
        self._backoff = backoff_seconds

    def _post(self, path: str, payload: dict) -> httpx.Response:
        last: Exception | None = None
        for attempt in range(self._max_retries):
            try:
                resp = self._client.post(path, json=payload)
            except RETRYABLE as exc:
                last = exc
                time.sleep(self._backoff * (2**attempt))
                continue
            if resp.status_code >= 500:
                last = TransportFailure(f"{path}: server error {resp.status_code}")
                time.sleep(self._backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise PortContractError(f"{path}: status {resp.status_code}: {resp.text}")
            return resp
        raise TransportFailure(f"{path}: failed after {self._max_retries} attempts") from last


class RemoteEmbedderPort(_RemotePort):
    """Client for the embedding role; exposes the EmbedderPort protocol."""

    def __init__(self, dimension: int, **kwargs) -> None:
        super().__init__(**kwargs)
        self.dimension = dimension

    def embed(self, frames: Sequence[FrameRecord]) -> np.ndarray:
        payload = {"images": [encode_frame_png(f) for f in frames]}
        resp = self._post("/v1/embed", payload)
        vectors = np.asarray(resp.json()["vectors"], dtype=np.float64)
        if len(frames) == 0:
            return np.zeros((0, self.dimension))
        if vectors.shape != (len(frames), self.dimension):
            raise PortContractError(
                f"/v1/embed returned shape {vectors.shape}, expected {(len(frames), self.dimension)}"
            )
        header = resp.headers.get("x-embedding-dimension")
        if header is not None and int(header) != self.dimension:
            raise PortContractError(f"/v1/embed dimension header {header} != {self.dimension}")
        return vectors


class RemoteSimilarityPort(_RemotePort):
    """Client for the similarity role; maps raw cosines from [-1, 1] to [0, 1]."""

    def score(self, text: str, frames: Sequence[FrameRecord]) -> list[float]:
        payload = {"text": text, "images": [encode_frame_png(f) for f in frames]}
        resp = self._post("/v1/similarity", payload)
        raw = resp.json()["scores"]
        if len(raw) != len(frames):
            raise PortContractError(f"/v1/similarity returned {len(raw)} scores for {len(frames)} images")
        scores = [(float(v) + 1.0) / 2.0 for v in raw]
        if any(not 0.0 <= v <= 1.0 for v in scores):
            raise PortContractError("/v1/similarity returned cosines outside [-1, 1]")
        return scores


def verify_embedder_contract(port, frames: Sequence[FrameRecord]) -> None:
    """Shared embed-contract assertions: count and order preservation,
    constant dimension, determinism, finite values."""
    assert len(frames) >= 2, "contract check needs at least two frames"
    first = np.asarray(port.embed(frames))
    assert first.shape == (len(frames), port.dimension)
    assert np.all(np.isfinite(first))
    again = np.asarray(port.embed(frames))
    assert np.array_equal(first, again), "embedding not deterministic"
    single = np.asarray(port.embed(frames[:1]))
    assert single.shape == (1, port.dimension)
    assert np.array_equal(single[0], first[0]), "embedding depends on batch context"
    empty = np.asarray(port.embed([]))
    assert empty.size == 0


def verify_similarity_contract(port, frames: Sequence[FrameRecord], texts: Sequence[str]) -> None:
    """Shared similarity-contract assertions: per-call count preservation,
    scores in [0, 1], determinism across calls."""
    assert len(frames) >= 1 and len(texts) >= 1
    for text in texts:
        scores = port.score(text, frames)
        assert len(scores) == len(frames)
        assert all(0.0 <= s <= 1.0 for s in scores), f"scores outside [0, 1]: {scores}"
        assert scores == port.score(text, frames), "similarity not deterministic"
    assert port.score(texts[0], []) == []

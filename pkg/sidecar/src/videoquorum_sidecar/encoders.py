"""Deterministic encoder implementations behind the sidecar's two roles.

Model identifiers come from config so any encoder honoring the wire
contract can back the service; the builtins are lightweight deterministic
stand-ins (fixed random projection for embeddings, a color-lexicon scorer
for similarity) that need no weights and give byte-stable outputs.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import io
import re

import numpy as np
from PIL import Image, UnidentifiedImageError

EMBED_MODELS = ("builtin:random-projection",)
SIMILARITY_MODELS = ("builtin:chroma-lexical",)

_PATCH = 32  # working resolution for both builtin encoders

# hue anchors (fraction of the hue circle) for the color lexicon
_COLOR_HUES = {
    "red": 0.0,
    "orange": 0.08,
    "yellow": 0.17,
    "green": 0.33,
    "cyan": 0.5,
    "teal": 0.48,
    "blue": 0.67,
    "purple": 0.78,
    "violet": 0.78,
    "magenta": 0.88,
    "pink": 0.92,
}


class ImageDecodeError(ValueError):
    pass


def decode_image(payload: str) -> np.ndarray:
    try:
        raw = base64.b64decode(payload, validate=True)
        with Image.open(io.BytesIO(raw)) as img:
            small = img.convert("RGB").resize((_PATCH, _PATCH), Image.BILINEAR)
            return np.asarray(small, dtype=np.float64) / 255.0
    except (binascii.Error, UnidentifiedImageError, OSError, ValueError) as exc:
        raise ImageDecodeError(str(exc)) from exc


class RandomProjectionEncoder:
    """Pixels -> fixed seeded Gaussian projection; one vector per image."""

    def __init__(self, dimension: int = 384, seed: int = 1234) -> None:
        self.dimension = dimension
        rng = np.random.default_rng(seed)
        features = _PATCH * _PATCH * 3
        self._projection = rng.standard_normal((features, dimension)) / np.sqrt(features)

    def embed(self, images: list[np.ndarray]) -> np.ndarray:
        if not images:
            return np.zeros((0, self.dimension))
        # one matvec per image: a batched matmul would round differently
        # depending on batch size, breaking bitwise batch-invariance
        return np.stack([(img.ravel() - 0.5) @ self._projection for img in images])


def _hue_histogram(image: np.ndarray, bins: int = 12) -> np.ndarray:
    r, g, b = image[..., 0], image[..., 1], image[..., 2]
    maxc = image.max(axis=-1)
    minc = image.min(axis=-1)
    spread = maxc - minc
    safe = np.where(spread > 0, spread, 1.0)
    hue = np.select(
        [maxc == r, maxc == g],
        [(g - b) / safe, 2.0 + (b - r) / safe],
        default=4.0 + (r - g) / safe,
    )
    hue = np.where(spread > 0, (hue / 6.0) % 1.0, 0.0)
    idx = np.minimum((hue * bins).astype(np.int64), bins - 1)
    weights = spread.ravel()  # saturation-weighted so gray pixels vote weakly
    hist = np.bincount(idx.ravel(), weights=weights, minlength=bins)
    total = hist.sum()
    return hist / total if total > 0 else hist


class ChromaLexicalScorer:
    """Cosine between a color-lexicon text embedding and the image's
    saturation-weighted hue profile, with hashed tokens filling an
    orthogonal block so unrelated text scores near zero."""

    HUE_BINS = 12
    HASH_BINS = 16

    def _text_vector(self, text: str) -> np.ndarray:
        hue = np.zeros(self.HUE_BINS)
        hashed = np.zeros(self.HASH_BINS)
        for token in re.findall(r"[a-z]+", text.lower()):
            if token in _COLOR_HUES:
                idx = min(int(_COLOR_HUES[token] * self.HUE_BINS), self.HUE_BINS - 1)
                hue[idx] += 1.0
            else:
                digest = hashlib.sha256(token.encode()).digest()
                hashed[digest[0] % self.HASH_BINS] += 1.0
        return np.concatenate([hue, 0.25 * hashed])

    def _image_vector(self, image: np.ndarray) -> np.ndarray:
        return np.concatenate([_hue_histogram(image, self.HUE_BINS), np.zeros(self.HASH_BINS)])

    def score(self, text: str, images: list[np.ndarray]) -> list[float]:
        t = self._text_vector(text)
        t_norm = np.linalg.norm(t)
        scores = []
        for image in images:
            v = self._image_vector(image)
            denom = t_norm * np.linalg.norm(v)
            value = float(np.dot(t, v) / denom) if denom > 0 else 0.0
            scores.append(max(-1.0, min(1.0, value)))
        return scores


def build_embedder(model: str, dimension: int, seed: int) -> RandomProjectionEncoder:
    if model not in EMBED_MODELS:
        raise LookupError(f"unknown embed model {model!r}; builtins: {EMBED_MODELS}")
    return RandomProjectionEncoder(dimension=dimension, seed=seed)


def build_scorer(model: str) -> ChromaLexicalScorer:
    if model not in SIMILARITY_MODELS:
        raise LookupError(f"unknown similarity model {model!r}; builtins: {SIMILARITY_MODELS}")
    return ChromaLexicalScorer()

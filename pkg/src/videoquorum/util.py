"""Small shared helpers: stable seed derivation and window averaging."""

from __future__ import annotations

import hashlib

import numpy as np

EPS = 1e-8


def derive_seed(*parts: object) -> int:
    """Derive a stable 63-bit seed from arbitrary labelled parts.

    Unlike ``hash()`` this is stable across processes, so every seeded draw
    in the engine can be reproduced from (base seed, labels).
    """
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "big") >> 1


def rng_for(*parts: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with windows truncated at the boundaries."""
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd integer")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    half = window // 2
    csum = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(x.size)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, x.size)
    return (csum[hi] - csum[lo]) / (hi - lo)


def cosine_distance(a: np.ndarray, b: np.ndarray, eps: float = EPS) -> float:
    """1 - cos(a, b) with an epsilon-stabilized denominator."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = float(np.linalg.norm(a)) * float(np.linalg.norm(b)) + eps
    return 1.0 - float(np.dot(a, b)) / denom

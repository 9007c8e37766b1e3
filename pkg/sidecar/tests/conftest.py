from __future__ import annotations

import base64
import io

import numpy as np
import pytest
from PIL import Image
from starlette.testclient import TestClient

from videoquorum_sidecar import Settings, create_app


def png_b64(pixels: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(pixels.astype(np.uint8)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def solid(rgb, shape=(20, 24)) -> str:
    pixels = np.zeros((*shape, 3), dtype=np.uint8)
    pixels[..., 0], pixels[..., 1], pixels[..., 2] = rgb
    return png_b64(pixels)


@pytest.fixture(scope="session")
def client() -> TestClient:
    return TestClient(create_app(Settings(dimension=64, seed=99)))


@pytest.fixture
def images() -> list[str]:
    rng = np.random.default_rng(5)
    return [png_b64(rng.integers(0, 256, size=(18, 22, 3), dtype=np.uint8)) for _ in range(4)]

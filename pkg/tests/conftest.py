from __future__ import annotations

import numpy as np
import pytest

from videoquorum.synth import synthetic_source


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240901)


@pytest.fixture
def small_source():
    """40-frame, 20 s synthetic clip with a cut at 10 s."""
    return synthetic_source(
        identifier="small", duration=20.0, frame_count=40, cut_times=(10.0,), seed=7,
        height=24, width=32,
    )

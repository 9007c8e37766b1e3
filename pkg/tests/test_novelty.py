from __future__ import annotations

import numpy as np
import pytest

from videoquorum.features import ColorDescriptor
from videoquorum.novelty import (
    BASE_WEIGHTS,
    COLOR_WEIGHTS,
    CueSeries,
    color_novelty,
    embedding_ema,
    embedding_novelty,
    fuse,
    midpoints,
    motion_novelty,
    robust_z,
    sharpness_novelty,
)


def descriptor(h, s, v):
    return ColorDescriptor(
        hist_h=np.asarray(h, dtype=np.float64),
        hist_s=np.asarray(s, dtype=np.float64),
        hist_v=np.asarray(v, dtype=np.float64),
    )


def one_hot(bin_index, mass=1 / 3, bins=32):
    h = np.zeros(bins)
    h[bin_index] = mass
    return h


class TestColorNovelty:
    def test_weights_are_the_documented_constants(self):
        assert COLOR_WEIGHTS == (0.55, 0.35, 0.10)
        assert sum(COLOR_WEIGHTS) == pytest.approx(1.0)

    def test_identical_descriptors_give_zero(self):
        d = descriptor(one_hot(0), one_hot(1), one_hot(2))
        series = color_novelty([d, d])
        assert series.values[0] == pytest.approx(0.0, abs=1e-6)

    def test_orthogonal_hue_identical_rest(self):
        a = descriptor(one_hot(0), one_hot(4), one_hot(8))
        b = descriptor(one_hot(9), one_hot(4), one_hot(8))
        series = color_novelty([a, b])
        assert series.values[0] == pytest.approx(0.55, abs=1e-6)

    def test_requires_two_descriptors(self):
        with pytest.raises(ValueError):
            color_novelty([descriptor(one_hot(0), one_hot(0), one_hot(0))])


class TestDiffNovelties:
    def test_plain_absolute_differences(self):
        s = sharpness_novelty(np.array([1.0, 4.0, 2.5]))
        np.testing.assert_allclose(s.values, [3.0, 1.5])
        m = motion_novelty(np.array([0.0, 0.2, 0.2]))
        np.testing.assert_allclose(m.values, [0.2, 0.0])


class TestEmbeddingNovelty:
    def test_ema_unrolls_exactly(self):
        e = np.eye(3)
        ema = embedding_ema(e, decay=0.9)
        np.testing.assert_allclose(ema[0], e[0])
        np.testing.assert_allclose(ema[1], 0.9 * e[0] + 0.1 * e[1])
        np.testing.assert_allclose(ema[2], 0.81 * e[0] + 0.09 * e[1] + 0.1 * e[2])

    def test_constant_sequence_is_zero(self):
        e = np.tile(np.array([1.0, 2.0, 2.0]), (6, 1))
        series = embedding_novelty(e)
        np.testing.assert_allclose(series.values, 0.0, atol=1e-6)

    def test_orthogonal_flip_spikes(self):
        u = np.array([1.0, 0.0])
        v = np.array([0.0, 1.0])
        e = np.array([u, u, u, v])
        series = embedding_novelty(e)
        # before the flip: nothing; at the flip both distances fire
        np.testing.assert_allclose(series.values[:2], 0.0, atol=1e-6)
        # d_prev = 1 exactly (orthogonal); d_ema close to 1 (EMA is still u-heavy)
        assert series.values[2] == pytest.approx(1.0, abs=0.01)

    def test_values_within_cosine_range(self, rng):
        e = rng.standard_normal((50, 8))
        series = embedding_novelty(e)
        assert (series.values >= 0.0).all()
        assert (series.values <= 2.0).all()

    def test_ema_distance_uses_prefix_state(self):
        # after the flip the EMA lags, so novelty persists while d_prev drops
        u, v = np.eye(2)
        e = np.array([u, u, v, v])
        series = embedding_novelty(e)
        # step 3->4: identical vectors, but EMA still remembers u
        assert series.values[2] > 0.1


class TestRobustZ:
    def test_constant_series_is_zero(self):
        series = CueSeries(cue="x", values=np.full(20, 3.3))
        np.testing.assert_array_equal(robust_z(series).values, np.zeros(20))

    def test_extreme_outlier_clips_to_four(self):
        values = np.zeros(101)
        values[50] = 1e6
        out = robust_z(CueSeries(cue="x", values=values))
        assert out.values.max() == 4.0
        assert (out.values <= 4.0).all() and (out.values >= -4.0).all()

    def test_shift_invariance_exact_on_dyadics(self, rng):
        # dyadic values + dyadic shift make the float arithmetic exact
        values = rng.integers(-40, 40, size=51) * 0.25
        shifted = values + 3.5
        a = robust_z(CueSeries(cue="x", values=values)).values
        b = robust_z(CueSeries(cue="x", values=shifted)).values
        np.testing.assert_array_equal(a, b)

    def test_scale_equivariance(self, rng):
        values = rng.standard_normal(200)
        a = robust_z(CueSeries(cue="x", values=values)).values
        b = robust_z(CueSeries(cue="x", values=4.0 * values)).values
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_mad_recovers_sigma_monte_carlo(self):
        rng = np.random.default_rng(1234)
        sample = rng.normal(0.0, 2.0, size=10_000)
        med = np.median(sample)
        mad = np.median(np.abs(sample - med))
        assert 1.4826 * mad == pytest.approx(2.0, rel=0.10)

    def test_window_must_be_odd(self):
        with pytest.raises(ValueError):
            robust_z(CueSeries(cue="x", values=np.arange(5.0)), window=4)


class TestFuse:
    def _mk(self, values):
        return (
            CueSeries("color", np.asarray(values, dtype=np.float64)),
            CueSeries("motion", np.asarray(values, dtype=np.float64)),
            CueSeries("embedding", np.asarray(values, dtype=np.float64)),
            CueSeries("sharpness", np.asarray(values, dtype=np.float64)),
        )

    def test_base_weights_sum_to_point_nine(self):
        assert sum(BASE_WEIGHTS.values()) == pytest.approx(0.90)
        assert BASE_WEIGHTS == {
            "color": 0.20,
            "motion": 0.30,
            "embedding": 0.35,
            "sharpness": 0.05,
        }

    def test_identical_cues_reduce_to_smoothed_input(self, rng):
        values = rng.standard_normal(30)
        taus = np.arange(30, dtype=np.float64)
        signal = fuse(taus, *self._mk(values))
        from videoquorum.util import moving_average

        np.testing.assert_allclose(signal.values, moving_average(values, 5), atol=1e-12)
        assert signal.fusion_weights.sum() == pytest.approx(1.0, abs=1e-9)

    def test_constant_cue_gets_zero_weight(self, rng):
        varying = rng.standard_normal(40)
        col, mot, emb, shp = self._mk(varying)
        shp = CueSeries("sharpness", np.zeros(40))
        signal = fuse(np.arange(40, dtype=np.float64), col, mot, emb, shp)
        weights = signal.fusion_weights
        assert weights[3] == 0.0
        assert weights.sum() == pytest.approx(1.0, abs=1e-9)
        # surviving cues share identical sigma, so weights renormalize the betas
        expected = np.array([0.20, 0.30, 0.35]) / 0.85
        np.testing.assert_allclose(weights[:3], expected, atol=1e-12)

    def test_all_constant_falls_back_to_base_weights(self):
        flat = self._mk(np.zeros(10))
        signal = fuse(np.arange(10, dtype=np.float64), *flat)
        np.testing.assert_allclose(
            signal.fusion_weights, np.array([0.20, 0.30, 0.35, 0.05]) / 0.90
        )
        np.testing.assert_array_equal(signal.values, np.zeros(10))

    def test_weights_nonnegative_and_values_finite(self, rng):
        series = [rng.standard_normal(25) for _ in range(4)]
        signal = fuse(
            np.arange(25, dtype=np.float64),
            CueSeries("color", series[0]),
            CueSeries("motion", series[1]),
            CueSeries("embedding", series[2]),
            CueSeries("sharpness", series[3]),
        )
        assert (signal.fusion_weights >= 0).all()
        assert np.isfinite(signal.values).all()


def test_midpoints_halve_consecutive_timestamps():
    np.testing.assert_allclose(midpoints([0.0, 1.0, 4.0]), [0.5, 2.5])


def test_ema_state_uses_raw_not_unit_vectors():
    # a unit-state EMA would give [0.9, 0.1] for this input; the raw-state
    # recursion keeps the first vector's magnitude
    e = np.array([[2.0, 0.0], [0.0, 1.0]])
    ema = embedding_ema(e, decay=0.9)
    np.testing.assert_allclose(ema[1], [1.8, 0.1])

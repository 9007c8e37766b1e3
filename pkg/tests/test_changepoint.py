from __future__ import annotations

import numpy as np
import pytest

from helpers import (
    brute_force_optimum,
    dense_optimal_segmentation,
    objective_of,
)
from videoquorum.changepoint import (
    COMPILED_KERNEL,
    boundary_strength,
    pelt_head,
    pelt_segment,
    pelt_segment_reference,
    pool,
)
from videoquorum.novelty import NoveltySignal


def signal_from(values, times=None):
    values = np.asarray(values, dtype=np.float64)
    times = np.asarray(times if times is not None else np.arange(len(values)) + 0.5, dtype=np.float64)
    return NoveltySignal(midpoints=times, values=values, fusion_weights=np.full(4, 0.25))


class TestPool:
    def test_enumerated_bins_at_one_hertz(self):
        # ten midpoints spaced 1 s apart, bins of width 1
        times = np.arange(10, dtype=np.float64) + 0.5
        values = np.array([0, 1, 2, 1, 0, 5, 1, 1, 2, 9], dtype=np.float64)
        pooled = pool(signal_from(values, times), 1.0)
        # span 9 s -> 9 bins; the final midpoint joins the last bin
        assert len(pooled.values) == 9
        expected = [values[i] for i in range(8)] + [max(values[8], values[9])]
        np.testing.assert_allclose(pooled.values, expected)
        np.testing.assert_allclose(np.diff(pooled.bin_centers), 1.0)

    def test_resolution_beyond_span_single_bin(self):
        pooled = pool(signal_from([1.0, 7.0, 3.0]), 100.0)
        assert len(pooled.values) == 1
        assert pooled.values[0] == 7.0

    def test_monotone_signal_stays_monotone(self):
        pooled = pool(signal_from(np.linspace(0, 5, 40)), 0.5)
        assert (np.diff(pooled.values) >= 0).all()

    def test_empty_bins_inherit_previous(self):
        times = np.array([0.0, 0.4, 5.0])  # 4 s hole between midpoints
        pooled = pool(signal_from([2.0, 1.0, 9.0], times), 1.0)
        assert len(pooled.values) == 5
        np.testing.assert_allclose(pooled.values, [2.0, 2.0, 2.0, 2.0, 9.0])


class TestPeltSegment:
    def test_constant_sequence_no_changes(self):
        assert pelt_segment(np.full(30, 2.5), 1.0, 1) == []

    def test_two_level_step(self):
        values = np.array([0.0] * 10 + [5.0] * 10)
        assert pelt_segment(values, 1.0, 1) == [10]
        # oracle agrees on the optimum objective
        oracle_obj, oracle_changes = dense_optimal_segmentation(values, 1.0, 1)
        assert oracle_changes == [10]
        assert objective_of(values, [10], 1.0) == oracle_obj

    def test_huge_penalty_suppresses_changes(self):
        values = np.array([0.0] * 5 + [9.0] * 5 + [1.0] * 5)
        assert pelt_segment(values, 1e9, 1) == []

    def test_min_segment_constraint_enforced(self, rng):
        for _ in range(50):
            values = rng.standard_normal(rng.integers(6, 20))
            for min_size in (2, 3):
                changes = pelt_segment(values, 0.5, min_size)
                edges = [0, *changes, len(values)]
                assert all(b - a >= min_size for a, b in zip(edges, edges[1:])) or not changes

    def test_matches_dense_oracle_on_random_sequences(self, rng):
        # the oracle is an unpruned O(n^2) DP with its own cost function
        for _ in range(120):
            n = int(rng.integers(2, 21))
            values = rng.normal(0.0, 2.0, size=n)
            min_size = int(rng.integers(1, 4))
            penalty = float(rng.uniform(0.05, 8.0))
            got = pelt_segment(values, penalty, min_size)
            oracle_obj, _ = dense_optimal_segmentation(values, penalty, min_size)
            assert objective_of(values, got, penalty) == oracle_obj

    def test_dense_oracle_matches_brute_force_small(self, rng):
        # validates the oracle itself against literal cut-set enumeration
        for _ in range(20):
            n = int(rng.integers(2, 11))
            values = rng.normal(size=n)
            for min_size in (1, 2):
                penalty = float(rng.uniform(0.1, 4.0))
                oracle_obj, _ = dense_optimal_segmentation(values, penalty, min_size)
                assert oracle_obj == pytest.approx(brute_force_optimum(values, penalty, min_size), abs=1e-9)

    @pytest.mark.skipif(not COMPILED_KERNEL, reason="compiled kernel not built")
    def test_compiled_and_pure_paths_identical(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            values = rng.normal(size=n)
            penalty = float(rng.uniform(0.0, 6.0))
            min_size = int(rng.integers(1, 4))
            assert pelt_segment(values, penalty, min_size) == pelt_segment_reference(
                values, penalty, min_size
            )


class TestBoundaryStrength:
    def test_constant_series_zero_everywhere(self):
        values = np.full(10, 4.0)
        assert all(boundary_strength(values, k, 3) == 0.0 for k in range(1, 10))

    def test_step_recovers_height(self):
        values = np.array([1.0] * 6 + [4.0] * 6)
        assert boundary_strength(values, 6, 3) == pytest.approx(3.0)

    def test_truncated_window_example(self):
        assert boundary_strength([0.0, 0.0, 4.0, 4.0, 4.0], 2, 2) == pytest.approx(4.0)

    def test_edge_indices_are_safe(self):
        assert boundary_strength([1.0, 2.0], 0, 2) == 0.0


class TestPeltHead:
    def test_white_noise_yields_few_candidates(self):
        rng = np.random.default_rng(42)
        times = np.arange(300, dtype=np.float64) + 0.5
        sig = signal_from(rng.standard_normal(300), times)
        candidates = pelt_head(sig, min_segment_seconds=20.0, duration=300.0)
        total_bins = sum(len(pool(sig, r).values) for r in (0.25, 0.5, 1.0))
        assert len(candidates) <= 0.10 * total_bins

    def test_clean_step_gives_one_candidate_near_truth(self):
        times = np.arange(120, dtype=np.float64) + 0.5
        values = np.concatenate([np.zeros(60), np.ones(60) * 3.0])
        candidates = pelt_head(signal_from(values, times), min_segment_seconds=8.0, duration=120.0)
        assert candidates, "expected at least one candidate"
        best = max(candidates, key=lambda c: c.strength)
        assert abs(best.time_seconds - 60.0) <= 1.0  # within the coarsest bin width
        # all candidate times collapse near the step
        assert all(abs(c.time_seconds - 60.0) <= 2.0 for c in candidates)

    def test_constant_signal_empty(self):
        sig = signal_from(np.zeros(50))
        assert pelt_head(sig, min_segment_seconds=4.0, duration=50.0) == []

    def test_candidates_strictly_inside(self):
        times = np.arange(40, dtype=np.float64) + 0.5
        values = np.concatenate([np.zeros(20), np.ones(20)])
        for cand in pelt_head(signal_from(values, times), 2.0, 40.0):
            assert 0.0 < cand.time_seconds < 40.0


def test_candidate_csv_carries_run_provenance(tmp_path):
    from videoquorum.changepoint import dump_candidates_csv

    times = np.arange(120, dtype=np.float64) + 0.5
    values = np.concatenate([np.zeros(60), np.ones(60) * 3.0])
    candidates = pelt_head(signal_from(values, times), min_segment_seconds=8.0, duration=120.0)
    assert all("delta=" in c.detail and "lambda=" in c.detail for c in candidates)
    path = tmp_path / "candidates.csv"
    dump_candidates_csv(path, candidates)
    header, first = path.read_text().splitlines()[:2]
    assert header == "time_seconds,strength,head,detail"
    assert "delta=" in first


@pytest.mark.skipif(not COMPILED_KERNEL, reason="compiled kernel not built")
def test_compiled_and_pure_identical_on_tie_heavy_integers(rng):
    # binary-valued sequences maximize exact cost ties, stressing the
    # pruning schedule in both kernels
    for _ in range(150):
        n = int(rng.integers(4, 50))
        values = rng.integers(0, 2, size=n).astype(np.float64)
        penalty = float(rng.choice([0.0, 0.5, 1.0, 2.0]))
        min_size = int(rng.integers(1, 4))
        assert pelt_segment(values, penalty, min_size) == pelt_segment_reference(
            values, penalty, min_size
        )


def test_pure_fallback_selected_when_extension_missing():
    # block the compiled module in a child interpreter and confirm the
    # dispatcher falls back with identical results
    import subprocess
    import sys

    code = (
        "import importlib.abc, sys\n"
        "class Blocker(importlib.abc.MetaPathFinder):\n"
        "    def find_spec(self, name, path, target=None):\n"
        "        if name == 'videoquorum._speedups':\n"
        "            raise ImportError('blocked for test')\n"
        "sys.meta_path.insert(0, Blocker())\n"
        "from videoquorum import changepoint\n"
        "assert changepoint.COMPILED_KERNEL is False\n"
        "assert changepoint.pelt_segment([0.0]*10 + [5.0]*10, 1.0, 1) == [10]\n"
        "print('fallback-ok')\n"
    )
    result = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert result.returncode == 0, result.stderr
    assert "fallback-ok" in result.stdout

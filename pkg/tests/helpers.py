"""Test-side oracles and fixture builders.

The oracles here deliberately use different algorithms/code paths from the
implementations they check: dense O(n^2) DP instead of pruned PELT, nested
loops instead of vectorized kernels, direct double sums instead of integral
tables.
"""

from __future__ import annotations

import numpy as np

from videoquorum.ingest import FrameRecord


def frame(index: int, timestamp: float, pixels: np.ndarray) -> FrameRecord:
    return FrameRecord(index=index, timestamp_seconds=timestamp, pixels=pixels)


def solid_frame(index: int, timestamp: float, rgb, shape=(24, 32)) -> FrameRecord:
    pixels = np.zeros((*shape, 3), dtype=np.uint8)
    pixels[..., 0], pixels[..., 1], pixels[..., 2] = rgb
    return frame(index, timestamp, pixels)


# ---------------------------------------------------------------- segmentation


def segment_cost_oracle(x: np.ndarray, a: int, b: int) -> float:
    """l2 cost of x[a:b] computed the slow way (mean + squared deviations).

    Formula-independent of the engine's prefix-sum cost; equal up to
    floating-point reassociation, so comparisons against it use tolerances.
    """
    seg = x[a:b]
    mu = seg.mean()
    return float(((seg - mu) ** 2).sum())


def make_prefix_cost(x: np.ndarray):
    """Segment cost in the engine's exact arithmetic ((S2 - S1^2/len) on
    sequential prefix sums); used where bit-exact objective comparison is
    the point."""
    s1 = np.concatenate(([0.0], np.cumsum(x)))
    s2 = np.concatenate(([0.0], np.cumsum(x * x)))

    def cost(a: int, b: int) -> float:
        d = s1[b] - s1[a]
        return (s2[b] - s2[a]) - d * d / (b - a)

    return cost


def dense_optimal_segmentation(
    x: np.ndarray, penalty: float, min_size: int
) -> tuple[float, list[int]]:
    """Exhaustive-search optimum of the l2 + penalty-per-change objective.

    Unpruned O(n^2) dynamic program over all admissible last-change
    positions; provably equal to full enumeration over cut sets. Segments
    created by changes must be >= min_size; the unsegmented whole is always
    admissible.
    """
    n = len(x)
    cost = make_prefix_cost(x)
    if n < 2 * min_size:
        return -penalty + cost(0, n) + penalty, []
    inf = float("inf")
    best = [inf] * (n + 1)
    prev = [-1] * (n + 1)
    best[0] = -penalty
    for t in range(1, n + 1):
        for s in range(0, t - min_size + 1):
            if best[s] == inf:
                continue
            value = best[s] + cost(s, t) + penalty
            if value < best[t]:
                best[t] = value
                prev[t] = s
    changes: list[int] = []
    t = n
    while t > 0 and prev[t] > 0:
        changes.append(prev[t])
        t = prev[t]
    changes.reverse()
    return best[n], changes


def enumerate_all_cut_sets(n: int, min_size: int) -> list[tuple[int, ...]]:
    """Every admissible change set for a sequence of length n (small n only)."""
    from itertools import combinations

    sets: list[tuple[int, ...]] = [()]
    interior = range(1, n)
    for k in range(1, n):
        for cuts in combinations(interior, k):
            edges = (0, *cuts, n)
            if all(b - a >= min_size for a, b in zip(edges, edges[1:])):
                sets.append(cuts)
    return sets


def brute_force_optimum(x: np.ndarray, penalty: float, min_size: int) -> float:
    best = float("inf")
    for cuts in enumerate_all_cut_sets(len(x), min_size):
        edges = (0, *cuts, len(x))
        value = sum(segment_cost_oracle(x, a, b) for a, b in zip(edges, edges[1:]))
        value += penalty * len(cuts)
        best = min(best, value)
    return best


def objective_of(x: np.ndarray, changes: list[int], penalty: float) -> float:
    """Objective of a change set in the same arithmetic the dense DP uses."""
    cost = make_prefix_cost(x)
    edges = (0, *changes, len(x))
    total = -penalty
    for a, b in zip(edges, edges[1:]):
        total = total + cost(a, b) + penalty
    return total


# ------------------------------------------------------------------- images


def convolve3x3_oracle(image: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Nested-loop 3x3 convolution with replicate borders."""
    h, w = image.shape
    out = np.zeros_like(image, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    yy = min(max(y + dy, 0), h - 1)
                    xx = min(max(x + dx, 0), w - 1)
                    acc += kernel[dy + 1, dx + 1] * image[yy, xx]
            out[y, x] = acc
    return out


def box_blur_oracle(image: np.ndarray, radius: int = 2) -> np.ndarray:
    h, w = image.shape
    out = np.zeros_like(image, dtype=np.float64)
    for y in range(h):
        for x in range(w):
            y0, y1 = max(0, y - radius), min(h, y + radius + 1)
            x0, x1 = max(0, x - radius), min(w, x + radius + 1)
            out[y, x] = image[y0:y1, x0:x1].mean()
    return out


def gram_block_sum_oracle(gram: np.ndarray, a: int, b: int) -> float:
    total = 0.0
    for p in range(a, b + 1):
        for q in range(a, b + 1):
            total += gram[p, q]
    return total


# ------------------------------------------------------------- orchestration


def agent_script(
    answers_by_round: dict,
    clue: str = "look for the decisive action",
    reason: str = "the frames show it clearly",
    evals_by_round: dict | None = None,
    refine: str = "focus on the conflicting moment",
    summary: str = "the evidence supports the chosen option",
    max_round: int = 3,
) -> dict:
    """Responses dict for a ScriptedBackend covering one question."""
    responses = {
        "clue": {"1": clue},
        "act": {str(r): v for r, v in answers_by_round.items()},
        "reason": {str(r): reason for r in range(1, max_round + 1)},
        "refine": {str(r): refine for r in range(1, max_round + 1)},
        "summarize": {str(r): summary for r in range(1, max_round + 1)},
    }
    if evals_by_round:
        responses["eval"] = {str(r): v for r, v in evals_by_round.items()}
    return responses


def build_run_fixture(question_specs, video_uris):
    """Manifest + scenario payloads for designed end-to-end mock runs.

    question_specs: list of (qid, gold, kind) with kind in
    {unanimous, wrong-unanimous, converge2, survivor3, wrong-survivor3}.
    Videos are assigned round-robin from video_uris.
    """
    agents = ["a", "b", "c"]
    rounds = ("1", "2", "3")
    responses = {
        ag: {
            "clue": {"1": {"*": f"clue from {ag}"}},
            "reason": {r: {"*": "visible in the frames"} for r in rounds},
            "refine": {r: {"*": "sharpened clue"} for r in rounds},
            "summarize": {r: {"*": "agents converged on the answer"} for r in rounds},
            "act": {r: {} for r in rounds},
            "eval": {r: {} for r in rounds},
        }
        for ag in agents
    }
    questions = []
    labels = ["A", "B", "C", "D"]
    for i, (qid, gold, kind) in enumerate(question_specs):
        questions.append(
            {
                "id": qid,
                "video": video_uris[i % len(video_uris)],
                "question": "What is the person mainly doing?",
                "options": labels,
                "gold": gold,
            }
        )
        wrong = next(l for l in labels if l != gold)
        if kind == "unanimous":
            for ag in agents:
                responses[ag]["act"]["1"][qid] = gold
        elif kind == "wrong-unanimous":
            for ag in agents:
                responses[ag]["act"]["1"][qid] = wrong
        elif kind == "converge2":
            responses["a"]["act"]["1"][qid] = gold
            responses["b"]["act"]["1"][qid] = gold
            responses["c"]["act"]["1"][qid] = wrong
            responses["a"]["eval"]["1"][qid] = "9 8 2"
            responses["b"]["eval"]["1"][qid] = "9 8 3"
            responses["c"]["eval"]["1"][qid] = "8 7 5"
            responses["a"]["act"]["2"][qid] = gold
            responses["b"]["act"]["2"][qid] = gold
        elif kind in ("survivor3", "wrong-survivor3"):
            final = gold if kind == "survivor3" else wrong
            responses["a"]["act"]["1"][qid] = "A"
            responses["b"]["act"]["1"][qid] = "B"
            responses["c"]["act"]["1"][qid] = "C"
            responses["a"]["eval"]["1"][qid] = "9 8 2"
            responses["b"]["eval"]["1"][qid] = "9 7 3"
            responses["c"]["eval"]["1"][qid] = "8 6 5"
            responses["a"]["act"]["2"][qid] = "A"
            responses["b"]["act"]["2"][qid] = "B"
            responses["a"]["eval"]["2"][qid] = "9 3"
            responses["b"]["eval"]["2"][qid] = "8 4"
            responses["a"]["act"]["3"][qid] = final
        else:
            raise ValueError(f"unknown kind {kind}")
    manifest = {"questions": questions}
    scenario = {"agents": [{"id": ag} for ag in agents], "responses": responses}
    return manifest, scenario


def make_deliberation(config=None, duration: float = 20.0, frames: int = 40, cut: float = 10.0):
    """A small, fully deterministic deliberation context for scripted runs."""
    from videoquorum.alliance import Deliberation
    from videoquorum.config import RunConfig
    from videoquorum.partition import Partition
    from videoquorum.selection import HashSimilarityPort
    from videoquorum.synth import synthetic_source

    source = synthetic_source(
        "delib", duration=duration, frame_count=frames, cut_times=(cut,), seed=13,
        height=16, width=16,
    )
    if config is None:
        config = RunConfig(preview_frames=2, action_frames=4, scoring_frames_per_block=2)
    partition = Partition(boundaries=(0.0, cut, duration))
    return Deliberation(source, partition, HashSimilarityPort(seed=1), config)

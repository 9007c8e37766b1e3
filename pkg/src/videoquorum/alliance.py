"""Multi-agent deliberation: teaming, answer/rating rounds, pruning with
clue refinement, and the per-question orchestration loop.

Round structure per question: (1.1) preview sampling + perception clue
(first round only), (1.2) clue-to-block scoring and action-frame sampling,
(2.1) answer + reason generation with a consensus check, (2.2) peer rating,
pruning of the lowest-rated agent, and clue refinement for the survivors.
The loop ends on consensus or when a single agent remains.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .backends import (
    AgentBackend,
    CapabilityRequest,
    parse_option_label,
    parse_ratings,
    render_prompt,
)
from .errors import BackendError, TransportFailure
from .ingest import VideoSource, decode_frames
from .partition import Partition, uniform_partition
from .selection import SimilarityPort, allocate_frames, sample_p1, sample_p2, score_blocks
from .util import derive_seed

logger = logging.getLogger(__name__)

#: failure modes tolerated per agent (the pool continues without it);
#: scenario gaps stay fatal so fixtures cannot silently degrade
AGENT_FAILURES = (BackendError, TransportFailure)


def invoke_backend(backend: AgentBackend, request: CapabilityRequest) -> str:
    if request.capability not in backend.capabilities:
        raise BackendError(
            f"{backend.identifier} does not support capability {request.capability!r}"
        )
    return backend.invoke(request)


@dataclass(frozen=True)
class Option:
    label: str
    text: str = ""


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    options: tuple[Option, ...]
    subtitles: str | None = None

    def __post_init__(self) -> None:
        if len(self.options) < 2:
            raise ValueError(f"question {self.id}: need at least 2 options")
        labels = [o.label for o in self.options]
        if len(set(labels)) != len(labels):
            raise ValueError(f"question {self.id}: duplicate option labels")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(o.label for o in self.options)

    def options_block(self) -> str:
        return "\n".join(f"{o.label}) {o.text}" if o.text else o.label for o in self.options)

    def prompt_text(self) -> str:
        if self.subtitles:
            return f"{self.text}\n\nSubtitles:\n{self.subtitles}"
        return self.text


@dataclass
class PoolMember:
    backend: AgentBackend
    teaming_score: float | None = None

    @property
    def identifier(self) -> str:
        return self.backend.identifier


@dataclass
class RoundState:
    index: int
    agent_ids: list[str]
    clues: dict[str, str] = field(default_factory=dict)
    preview_frames: dict[str, list[int]] = field(default_factory=dict)
    action_frames: dict[str, list[int]] = field(default_factory=dict)
    answers: dict[str, str | None] = field(default_factory=dict)
    reasons: dict[str, str] = field(default_factory=dict)
    ratings: np.ndarray | None = None  # rows: rater, cols: ratee (pool order)
    rating_sums: np.ndarray | None = None
    pruned: str | None = None
    failed: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {
            "index": self.index,
            "agents": list(self.agent_ids),
            "clues": [self.clues.get(a, "") for a in self.agent_ids],
            "action_frames": [self.action_frames.get(a, []) for a in self.agent_ids],
            "answers": [self.answers.get(a) for a in self.agent_ids],
            "reasons": [self.reasons.get(a, "") for a in self.agent_ids],
            "ratings": None if self.ratings is None else self.ratings.astype(int).tolist(),
            "rating_sums": None if self.rating_sums is None else [
                None if not math.isfinite(v) else float(v) for v in self.rating_sums
            ],
            "pruned": self.pruned,
            "failed": list(self.failed),
        }
        if self.preview_frames:
            out["preview_frames"] = [self.preview_frames.get(a, []) for a in self.agent_ids]
        return out


@dataclass
class DeliberationTrace:
    question_id: str
    partition: Partition
    rounds: list[RoundState]
    final_answer: str
    explanation: str
    stop_reason: str  # consensus | last-survivor | fixed-rounds | repeated-top-answer
    consensus_mode: str
    timing: dict[str, float] = field(default_factory=dict)

    def to_dict(self, include_timing: bool = False) -> dict:
        out = {
            "question_id": self.question_id,
            "final_answer": self.final_answer,
            "explanation": self.explanation,
            "stop_reason": self.stop_reason,
            "consensus_mode": self.consensus_mode,
            "partition": {
                "duration": self.partition.duration,
                "boundaries": list(self.partition.boundaries),
                "heads": list(self.partition.provenance),
            },
            "rounds": [r.to_dict() for r in self.rounds],
        }
        if include_timing:
            out["timing"] = dict(self.timing)
        return out


@dataclass(frozen=True)
class TeamingReport:
    frequencies: dict[str, dict[str, float]]  # question id -> option label -> fraction
    choices: dict[str, dict[str, str]]  # question id -> agent id -> label
    scores: dict[str, float]  # agent id -> mean agreement
    selected: tuple[str, ...]
    sample_count: int

    def to_dict(self) -> dict:
        return {
            "frequencies": self.frequencies,
            "choices": self.choices,
            "scores": self.scores,
            "selected": list(self.selected),
            "sample_count": self.sample_count,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "TeamingReport":
        return cls(
            frequencies=payload["frequencies"],
            choices=payload["choices"],
            scores=payload["scores"],
            selected=tuple(payload["selected"]),
            sample_count=payload["sample_count"],
        )


def check_consensus(answers: Sequence[str | None], mode: str = "full") -> str | None:
    """Full: all answers equal (and valid). Majority: the most frequent
    answer strictly exceeds half the pool; ties yield none."""
    if not answers:
        raise ValueError("empty answer set")
    if mode == "full":
        first = answers[0]
        if first is not None and all(a == first for a in answers):
            return first
        return None
    if mode != "majority":
        raise ValueError(f"unknown consensus mode: {mode}")
    counts: dict[str, int] = {}
    for a in answers:
        if a is not None:
            counts[a] = counts.get(a, 0) + 1
    if not counts:
        return None
    label, top = max(counts.items(), key=lambda kv: kv[1])
    return label if top > len(answers) / 2 else None


def _map_members(
    fn: Callable[[PoolMember], object], members: Sequence[PoolMember], workers: int
) -> list:
    if workers <= 1 or len(members) <= 1:
        return [fn(m) for m in members]
    with ThreadPoolExecutor(max_workers=min(workers, len(members))) as pool:
        return list(pool.map(fn, members))


def peer_ratings(
    members: Sequence[PoolMember],
    question: Question,
    round_state: RoundState,
    workers: int = 1,
) -> np.ndarray:
    """Every agent rates every agent's (answer, reason) pair, self included.
    Unparseable or missing ratings default to 5; out-of-range values clamp."""
    if len(members) < 2:
        raise ValueError("peer rating needs a pool of at least 2")
    lines = []
    for i, member in enumerate(members):
        answer = round_state.answers.get(member.identifier) or "(no valid answer)"
        reason = round_state.reasons.get(member.identifier, "")
        lines.append(f"Agent {i + 1}: answer {answer}: {reason}")
    prompt = render_prompt(
        "eval",
        question=question.prompt_text(),
        options=question.options_block(),
        answer_block="\n".join(lines),
        rater_count=len(members),
    )

    def rate(member: PoolMember) -> list[int]:
        request = CapabilityRequest(
            capability="eval",
            round_index=round_state.index,
            question_id=question.id,
            agent_id=member.identifier,
            prompt=prompt,
        )
        try:
            raw = invoke_backend(member.backend, request)
        except AGENT_FAILURES as exc:
            logger.warning("%s: eval failed (%s); defaulting ratings", member.identifier, exc)
            raw = ""
        return parse_ratings(raw, len(members))

    rows = _map_members(rate, members, workers)
    return np.asarray(rows, dtype=np.float64)


def rating_column_sums(ratings: np.ndarray, failed: Sequence[int] = ()) -> np.ndarray:
    sums = ratings.sum(axis=0)
    for idx in failed:
        sums[idx] = -np.inf
    return sums


def answer_scores(
    answers: Sequence[str | None], column_sums: np.ndarray
) -> dict[str, float]:
    """Total rating mass per answer: sum of proposing agents' column sums."""
    scores: dict[str, float] = {}
    for answer, score in zip(answers, column_sums):
        if answer is None or not math.isfinite(score):
            continue
        scores[answer] = scores.get(answer, 0.0) + float(score)
    return scores


def prune_and_refine(
    members: list[PoolMember],
    question: Question,
    round_state: RoundState,
    workers: int = 1,
) -> tuple[list[PoolMember], dict[str, str]]:
    """Remove the lowest-rated agent (ties: lowest pool index) and collect
    refined clues from the survivors."""
    sums = round_state.rating_sums
    if sums is None:
        raise ValueError("pruning needs rating sums")
    pruned_idx = int(np.argmin(sums))
    pruned = members[pruned_idx]
    round_state.pruned = pruned.identifier
    survivors = [m for i, m in enumerate(members) if i != pruned_idx]
    refined = refine_clues(
        survivors, question, round_state, pruned_id=pruned.identifier, workers=workers
    )
    return survivors, refined


def refine_clues(
    members: Sequence[PoolMember],
    question: Question,
    round_state: RoundState,
    pruned_id: str | None,
    workers: int = 1,
) -> dict[str, str]:
    answers = [round_state.answers.get(a) or "(none)" for a in round_state.agent_ids]
    reasons = [round_state.reasons.get(a, "") for a in round_state.agent_ids]
    pruned_note = f"; agent {pruned_id} was removed from the pool" if pruned_id else ""

    def refine(member: PoolMember) -> str:
        prompt = render_prompt(
            "refine",
            question=question.prompt_text(),
            options=question.options_block(),
            prior_clue=round_state.clues.get(member.identifier, ""),
            answers=", ".join(answers),
            reasons="\n".join(reasons),
            pruned_note=pruned_note,
        )
        request = CapabilityRequest(
            capability="refine",
            round_index=round_state.index,
            question_id=question.id,
            agent_id=member.identifier,
            prompt=prompt,
        )
        try:
            return invoke_backend(member.backend, request)
        except AGENT_FAILURES as exc:
            logger.warning("%s: refine failed (%s); keeping prior clue", member.identifier, exc)
            return round_state.clues.get(member.identifier, "")

    texts = _map_members(refine, members, workers)
    return {m.identifier: t for m, t in zip(members, texts)}


def summarize(
    question: Question,
    final_answer: str,
    rounds: Sequence[RoundState],
    summarizer: PoolMember,
) -> str:
    """Explanation for the user; the final answer itself is never altered."""
    last = rounds[-1]
    prompt = render_prompt(
        "summarize",
        question=question.prompt_text(),
        options=question.options_block(),
        final_answer=final_answer,
        clues="\n".join(last.clues.get(a, "") for a in last.agent_ids),
        answers=", ".join(str(last.answers.get(a)) for a in last.agent_ids),
        reasons="\n".join(last.reasons.get(a, "") for a in last.agent_ids),
    )
    request = CapabilityRequest(
        capability="summarize",
        round_index=last.index,
        question_id=question.id,
        agent_id=summarizer.identifier,
        prompt=prompt,
    )
    try:
        return invoke_backend(summarizer.backend, request)
    except Exception as exc:  # summarizer failure never changes the answer
        logger.warning("summarizer %s failed: %s", summarizer.identifier, exc)
        return ""


def pick_summarizer(members: Sequence[PoolMember]) -> PoolMember:
    best = members[0]
    for m in members[1:]:
        if (m.teaming_score or -math.inf) > (best.teaming_score or -math.inf):
            best = m
    return best


class Deliberation:
    """Per-question orchestration over a fixed video context."""

    def __init__(
        self,
        source: VideoSource,
        partition: Partition,
        similarity_port: SimilarityPort,
        config,
    ) -> None:
        self.source = source
        self.similarity_port = similarity_port
        self.config = config
        self.partition = partition
        if config.p2_mode == "uniform-blocks":
            self.active_partition = uniform_partition(source.duration_seconds, config.max_blocks)
        else:
            self.active_partition = partition

    def _seed(self, *parts: object) -> int:
        return derive_seed(self.config.seed, *parts)

    def _generate_clue(self, member: PoolMember, question: Question, round_index: int) -> tuple[str, list[int]]:
        n_preview = min(self.config.preview_frames, self.source.frame_count)
        indices = sample_p1(
            self.source,
            n_preview,
            mode=self.config.p1_mode,
            partition=self.partition,
            seed=self._seed(question.id, member.identifier, "p1"),
        )
        frames = decode_frames(self.source, indices)
        prompt = render_prompt(
            "clue",
            frame_count=len(frames),
            question=question.prompt_text(),
            options=question.options_block(),
        )
        request = CapabilityRequest(
            capability="clue",
            round_index=round_index,
            question_id=question.id,
            agent_id=member.identifier,
            prompt=prompt,
            frames=tuple(frames),
        )
        try:
            return invoke_backend(member.backend, request), indices
        except AGENT_FAILURES as exc:
            logger.warning("%s: clue generation failed (%s); continuing without", member.identifier, exc)
            return "", indices

    def _action_frames(self, member: PoolMember, question: Question, clue: str, round_index: int) -> list[int]:
        seed_parts = (question.id, member.identifier, round_index)
        scores = score_blocks(
            self.source,
            self.active_partition,
            clue or "(no clue)",
            self.similarity_port,
            frames_per_block=self.config.scoring_frames_per_block,
            threshold=self.config.retention_threshold,
            seed=self._seed(*seed_parts, "score"),
        )
        allocation = allocate_frames(
            scores,
            min(self.config.action_frames, self.source.frame_count),
            seed=self._seed(*seed_parts, "allocate"),
        )
        return sample_p2(
            self.source,
            allocation,
            self.active_partition,
            scores=scores,
            seed=self._seed(*seed_parts, "p2"),
        )

    def _answer_and_reason(
        self, member: PoolMember, question: Question, frame_indices: list[int], round_index: int
    ) -> tuple[str | None, str]:
        frames = tuple(decode_frames(self.source, frame_indices))
        prompt = render_prompt(
            "act",
            frame_count=len(frames),
            question=question.prompt_text(),
            options=question.options_block(),
        )
        base = dict(
            round_index=round_index,
            question_id=question.id,
            agent_id=member.identifier,
            frames=frames,
        )
        try:
            raw = invoke_backend(
                member.backend, CapabilityRequest(capability="act", prompt=prompt, **base)
            )
            label = parse_option_label(raw, question.labels)
            if label is None:
                retry_prompt = render_prompt(
                    "act_retry",
                    question=question.prompt_text(),
                    options=question.options_block(),
                    labels=", ".join(question.labels),
                )
                raw = invoke_backend(
                    member.backend,
                    CapabilityRequest(capability="act", prompt=retry_prompt, **base),
                )
                label = parse_option_label(raw, question.labels)
        except AGENT_FAILURES as exc:
            logger.warning("%s: answer generation failed: %s", member.identifier, exc)
            label = None
        if label is None:
            return None, ""
        reason_prompt = render_prompt("reason", answer=label, question=question.prompt_text())
        try:
            reason = invoke_backend(
                member.backend, CapabilityRequest(capability="reason", prompt=reason_prompt, **base)
            )
        except AGENT_FAILURES as exc:
            logger.warning("%s: reason generation failed: %s", member.identifier, exc)
            reason = ""
        return label, reason

    def run_round(
        self,
        members: list[PoolMember],
        question: Question,
        round_index: int,
        clues: dict[str, str],
        scoring_seconds: list[float] | None = None,
    ) -> RoundState:
        state = RoundState(index=round_index, agent_ids=[m.identifier for m in members])
        workers = self.config.effective_agent_workers(len(members))
        if round_index == 1:
            results = _map_members(
                lambda m: self._generate_clue(m, question, round_index), members, workers
            )
            for member, (clue, indices) in zip(members, results):
                clues[member.identifier] = clue
                state.preview_frames[member.identifier] = indices
        state.clues = {m.identifier: clues.get(m.identifier, "") for m in members}

        def timed_action_frames(m: PoolMember) -> list[int]:
            t0 = time.perf_counter()
            indices = self._action_frames(m, question, state.clues[m.identifier], round_index)
            if scoring_seconds is not None:
                scoring_seconds.append(time.perf_counter() - t0)
            return indices

        frame_sets = _map_members(timed_action_frames, members, workers)
        for member, indices in zip(members, frame_sets):
            state.action_frames[member.identifier] = indices
        outcomes = _map_members(
            lambda m: self._answer_and_reason(
                m, question, state.action_frames[m.identifier], round_index
            ),
            members,
            workers,
        )
        for member, (label, reason) in zip(members, outcomes):
            state.answers[member.identifier] = label
            state.reasons[member.identifier] = reason
            if label is None:
                state.failed.append(member.identifier)
        return state

    def run_question(self, question: Question, pool: Sequence[PoolMember]) -> DeliberationTrace:
        """Full deliberation loop; see the module docstring for the round plan."""
        if not pool:
            raise ValueError("empty agent pool")
        config = self.config
        members = list(pool)
        clues: dict[str, str] = {}
        rounds: list[RoundState] = []
        scoring_seconds: list[float] = []
        started = time.perf_counter()
        mode = config.stop_mode
        max_rounds = config.effective_max_rounds(len(members))
        prune_enabled = mode in ("consensus", "fixed-rounds")
        previous_top: str | None = None

        round_index = 1
        while members and round_index <= max_rounds:
            state = self.run_round(members, question, round_index, clues, scoring_seconds)
            rounds.append(state)
            ordered = [state.answers[m.identifier] for m in members]
            if len(state.failed) == len(members):
                raise BackendError(
                    f"question {question.id}: every agent failed in round {round_index}: "
                    f"{state.failed}"
                )
            if len(members) == 1:  # the all-failed guard above ensures a valid answer
                return self._finish(
                    question, members, rounds, ordered[0], "last-survivor", started,
                    scoring_seconds,
                )
            label = check_consensus(ordered, config.consensus_mode)
            if label is not None:
                return self._finish(
                    question, members, rounds, label, "consensus", started, scoring_seconds
                )
            final_round = round_index == max_rounds
            if final_round and mode == "fixed-rounds":
                answer = self._forced_answer(members, question, state, ordered)
                return self._finish(
                    question, members, rounds, answer, "fixed-rounds", started, scoring_seconds
                )

            workers = config.effective_agent_workers(len(members))
            state.ratings = peer_ratings(members, question, state, workers)
            failed_idx = [i for i, m in enumerate(members) if m.identifier in state.failed]
            state.rating_sums = rating_column_sums(state.ratings, failed_idx)

            if mode in ("no-prune-sum", "no-prune-maj"):
                scores = answer_scores(ordered, state.rating_sums)
                top = self._top_answer(scores, question)
                if top is not None and top == previous_top:
                    answer = self._no_prune_answer(mode, ordered, scores, question)
                    return self._finish(
                        question, members, rounds, answer, "repeated-top-answer", started,
                        scoring_seconds,
                    )
                previous_top = top
                if final_round:
                    answer = self._no_prune_answer(mode, ordered, scores, question)
                    return self._finish(
                        question, members, rounds, answer, "fixed-rounds", started,
                        scoring_seconds,
                    )
                clues = refine_clues(members, question, state, pruned_id=None, workers=workers)
            elif prune_enabled:
                members, clues = prune_and_refine(members, question, state, workers)
            round_index += 1

        raise BackendError(f"question {question.id}: deliberation ended without an answer")

    def _top_answer(self, scores: dict[str, float], question: Question) -> str | None:
        if not scores:
            return None
        best = max(scores.values())
        for label in question.labels:  # option order breaks exact ties
            if scores.get(label) == best:
                return label
        return None

    def _forced_answer(
        self,
        members: list[PoolMember],
        question: Question,
        state: RoundState,
        ordered: list[str | None],
    ) -> str:
        """Majority answer at the forced stop; rating sums break count ties."""
        counts: dict[str, int] = {}
        for a in ordered:
            if a is not None:
                counts[a] = counts.get(a, 0) + 1
        top = max(counts.values())
        tied = [label for label, c in counts.items() if c == top]
        if len(tied) == 1:
            return tied[0]
        if state.rating_sums is None:
            workers = self.config.effective_agent_workers(len(members))
            state.ratings = peer_ratings(members, question, state, workers)
            failed_idx = [i for i, m in enumerate(members) if m.identifier in state.failed]
            state.rating_sums = rating_column_sums(state.ratings, failed_idx)
        scores = answer_scores(ordered, state.rating_sums)
        best = max(scores.get(label, -math.inf) for label in tied)
        for label in question.labels:
            if label in tied and scores.get(label, -math.inf) == best:
                return label
        return tied[0]

    def _no_prune_answer(
        self,
        mode: str,
        ordered: list[str | None],
        scores: dict[str, float],
        question: Question,
    ) -> str:
        if mode == "no-prune-sum":
            top = self._top_answer(scores, question)
            if top is not None:
                return top
        counts: dict[str, int] = {}
        for a in ordered:
            if a is not None:
                counts[a] = counts.get(a, 0) + 1
        best = max(counts.values())
        tied = [label for label in question.labels if counts.get(label) == best]
        if len(tied) > 1:
            ranked = max(tied, key=lambda lab: scores.get(lab, -math.inf))
            return ranked
        return tied[0]

    def _finish(
        self,
        question: Question,
        members: list[PoolMember],
        rounds: list[RoundState],
        answer: str,
        stop_reason: str,
        started: float,
        scoring_seconds: list[float] | None = None,
    ) -> DeliberationTrace:
        explanation = summarize(question, answer, rounds, pick_summarizer(members))
        return DeliberationTrace(
            question_id=question.id,
            partition=self.partition,
            rounds=rounds,
            final_answer=answer,
            explanation=explanation,
            stop_reason=stop_reason,
            consensus_mode=self.config.consensus_mode,
            timing={
                "deliberation_seconds": time.perf_counter() - started,
                "scoring_seconds": sum(scoring_seconds or ()),
            },
        )

    def single_pass_answer(self, question: Question, backend: AgentBackend) -> str | None:
        """One perception + answer pass for a lone agent (teaming uses this;
        no rating, no pruning). Returns None on failure."""
        member = PoolMember(backend=backend)
        try:
            clue, _ = self._generate_clue(member, question, round_index=1)
            frames = self._action_frames(member, question, clue, round_index=1)
            label, _ = self._answer_and_reason(member, question, frames, round_index=1)
            return label
        except AGENT_FAILURES as exc:
            logger.warning("%s failed teaming sample %s: %s", backend.identifier, question.id, exc)
            return None


def team_agents(
    library: Sequence[AgentBackend],
    samples: Sequence[tuple[Deliberation, Question]],
    team_size: int,
) -> TeamingReport:
    """Unsupervised agent selection: every library agent answers every sample
    independently; an agent's score is the mean fraction of agents agreeing
    with its choice; the top ``team_size`` agents win (ties: library order).

    An agent failing a sample is excluded from that question's frequency
    denominator and earns 0 for that question.
    """
    if team_size > len(library):
        raise ValueError("team_size exceeds library size")
    if not samples:
        raise ValueError("teaming needs at least one sample")
    frequencies: dict[str, dict[str, float]] = {}
    choices: dict[str, dict[str, str]] = {}
    per_agent: dict[str, list[float]] = {b.identifier: [] for b in library}
    for deliberation, question in samples:
        votes: dict[str, str] = {}
        for backend in library:
            label = deliberation.single_pass_answer(question, backend)
            if label is not None:
                votes[backend.identifier] = label
        counts: dict[str, int] = {}
        for label in votes.values():
            counts[label] = counts.get(label, 0) + 1
        total = len(votes)
        freq = {
            option.label: (counts.get(option.label, 0) / total if total else 0.0)
            for option in question.options
        }
        frequencies[question.id] = freq
        choices[question.id] = votes
        for backend in library:
            label = votes.get(backend.identifier)
            per_agent[backend.identifier].append(freq[label] if label is not None else 0.0)
    scores = {agent: sum(vals) / len(samples) for agent, vals in per_agent.items()}
    order = sorted(range(len(library)), key=lambda i: (-scores[library[i].identifier], i))
    selected = tuple(library[i].identifier for i in order[:team_size])
    return TeamingReport(
        frequencies=frequencies,
        choices=choices,
        scores=scores,
        selected=selected,
        sample_count=len(samples),
    )

"""Manifest execution: context caching per video, bounded-worker question
processing, JSONL trace persistence, and the accuracy/latency summary.

Trace lines are deterministic for a fixed (config, seed, scenario,
manifest): wall-clock timing is reported only in the summary.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .alliance import DeliberationTrace, PoolMember, TeamingReport, team_agents
from .backends import AgentBackend, load_scenario
from .config import RunConfig
from .errors import ConfigError, VideoQuorumError
from .manifest import ManifestEntry
from .pipeline import VideoContext, build_context, make_embedder, make_similarity_port

logger = logging.getLogger(__name__)


@dataclass
class RunSummary:
    questions: int
    answered: int
    errors: list[str]
    correct: int | None
    accuracy: float | None
    mean_seconds_per_question: float
    round_histogram: dict[str, int]
    timing: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "questions": self.questions,
            "answered": self.answered,
            "errors": self.errors,
            "correct": self.correct,
            "accuracy": self.accuracy,
            "mean_seconds_per_question": self.mean_seconds_per_question,
            "round_histogram": self.round_histogram,
            "timing": self.timing,
        }


def trace_line(trace: DeliberationTrace) -> str:
    return json.dumps(trace.to_dict(), sort_keys=True, separators=(",", ":"))


def build_backends(config: RunConfig) -> list[AgentBackend]:
    """Agent library from config: scripted agents need a scenario file,
    remote agents a chat endpoint."""
    from .backends import RemoteChatBackend

    if config.scenario_path:
        backends, _ = load_scenario(config.scenario_path)
        by_id = {b.identifier: b for b in backends}
        if config.agents:
            missing = [a.id for a in config.agents if a.kind == "scripted" and a.id not in by_id]
            if missing:
                raise ConfigError(f"scenario lacks scripted agents: {missing}")
            out: list[AgentBackend] = []
            for spec in config.agents:
                if spec.kind == "scripted":
                    out.append(by_id[spec.id])
                else:
                    out.append(
                        RemoteChatBackend(
                            identifier=spec.id,
                            endpoint=spec.endpoint,
                            model=spec.model,
                            token_env=spec.token_env or None,
                        )
                    )
            return out
        return list(backends)
    if not config.agents:
        raise ConfigError("no agents configured: set a scenario file or [[agents]] entries")
    out = []
    for spec in config.agents:
        if spec.kind != "remote":
            raise ConfigError(f"agent {spec.id}: scripted agents need a scenario file")
        out.append(
            RemoteChatBackend(
                identifier=spec.id,
                endpoint=spec.endpoint,
                model=spec.model,
                token_env=spec.token_env or None,
            )
        )
    return out


def build_pool(
    backends: list[AgentBackend], report: TeamingReport | None, team_size: int
) -> list[PoolMember]:
    """The task pool: the teaming report's selection when present, else the
    first ``team_size`` backends in library order."""
    if report is not None:
        by_id = {b.identifier: b for b in backends}
        members = []
        for agent_id in report.selected:
            if agent_id not in by_id:
                raise ConfigError(f"teaming report selects unknown agent {agent_id}")
            members.append(PoolMember(backend=by_id[agent_id], teaming_score=report.scores.get(agent_id)))
        return members
    return [PoolMember(backend=b) for b in backends[:team_size]]


class ContextCache:
    def __init__(self, config: RunConfig) -> None:
        self._config = config
        self._embedder = make_embedder(config)
        self._similarity = make_similarity_port(config)
        self._contexts: dict[str, VideoContext] = {}

    def get(self, video: str) -> VideoContext:
        if video not in self._contexts:
            self._contexts[video] = build_context(
                video, self._config, embedder=self._embedder, similarity_port=self._similarity
            )
        return self._contexts[video]

    @property
    def partition_seconds(self) -> float:
        return sum(ctx.outcome.seconds for ctx in self._contexts.values())


def run_manifest(
    entries: list[ManifestEntry],
    config: RunConfig,
    backends: list[AgentBackend],
    traces_path: str | Path | None = None,
    teaming_report: TeamingReport | None = None,
) -> tuple[list[DeliberationTrace | None], RunSummary]:
    """Process every manifest entry; traces are written in manifest order.

    A failing question is recorded as an error and leaves a None trace; the
    rest of the run continues (CLI exit code 3 signals partial failure).
    """
    cache = ContextCache(config)
    pool = build_pool(backends, teaming_report, config.team_size)
    results: list[DeliberationTrace | None] = [None] * len(entries)
    done = [False] * len(entries)
    errors: list[str] = []
    durations: list[float] = []
    started = time.perf_counter()
    writer = open(traces_path, "w") if traces_path is not None else None
    flush_lock = threading.Lock()
    next_to_flush = 0

    def flush_ready() -> None:
        """Write finished traces incrementally, preserving manifest order."""
        nonlocal next_to_flush
        if writer is None:
            return
        with flush_lock:
            while next_to_flush < len(entries) and done[next_to_flush]:
                trace = results[next_to_flush]
                if trace is not None:
                    writer.write(trace_line(trace) + "\n")
                writer.flush()
                next_to_flush += 1

    def work(idx: int) -> None:
        entry = entries[idx]
        t0 = time.perf_counter()
        try:
            ctx = cache.get(entry.video)
            trace = ctx.deliberation.run_question(entry.question, pool)
            results[idx] = trace
        except VideoQuorumError as exc:
            logger.error("question %s failed: %s", entry.question.id, exc)
            errors.append(f"{entry.question.id}: {exc}")
        durations.append(time.perf_counter() - t0)
        done[idx] = True
        flush_ready()

    try:
        workers = max(1, config.question_concurrency)
        if workers == 1:
            for idx in range(len(entries)):
                work(idx)
        else:
            # contexts are built up front so parallel questions share them safely
            for video in dict.fromkeys(e.video for e in entries):
                cache.get(video)
            with ThreadPoolExecutor(max_workers=workers) as pool_exec:
                list(pool_exec.map(work, range(len(entries))))
    finally:
        if writer is not None:
            writer.close()

    answered = [t for t in results if t is not None]
    histogram: dict[str, int] = {}
    for trace in answered:
        key = str(len(trace.rounds))
        histogram[key] = histogram.get(key, 0) + 1
    correct = None
    accuracy = None
    golds = [e.gold for e in entries]
    if any(g is not None for g in golds):
        correct = sum(
            1
            for trace, gold in zip(results, golds)
            if trace is not None and gold is not None and trace.final_answer == gold
        )
        graded = sum(1 for g in golds if g is not None)
        accuracy = correct / graded if graded else None
    total = time.perf_counter() - started
    scoring = sum(t.timing.get("scoring_seconds", 0.0) for t in answered)
    deliberation = sum(t.timing.get("deliberation_seconds", 0.0) for t in answered)
    summary = RunSummary(
        questions=len(entries),
        answered=len(answered),
        errors=errors,
        correct=correct,
        accuracy=accuracy,
        mean_seconds_per_question=(sum(durations) / len(durations)) if durations else 0.0,
        round_histogram=dict(sorted(histogram.items())),
        timing={
            "total_seconds": total,
            "partition_seconds": cache.partition_seconds,
            "scoring_seconds": scoring,
            "agent_seconds": max(0.0, deliberation - scoring),
            "deliberation_seconds": deliberation,
        },
    )
    return results, summary


def run_teaming(
    entries: list[ManifestEntry], config: RunConfig, backends: list[AgentBackend]
) -> TeamingReport:
    cache = ContextCache(config)
    samples = [(cache.get(e.video).deliberation, e.question) for e in entries]
    return team_agents(backends, samples, config.team_size)

"""Agent backends and the prompt kit.

A backend is a chat transport: it receives a rendered prompt plus frames
and returns raw completion text. Two transports exist: a remote
chat-completion endpoint (multimodal messages, base64 frames) and a
scripted mock driven by a scenario file for byte-exact replay. Parsing of
option labels and ratings lives here too.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import httpx

from .errors import BackendError, ScenarioError, TransportFailure
from .ingest import FrameRecord

logger = logging.getLogger(__name__)

PROMPT_VERSION = "1"
ALL_CAPABILITIES = frozenset({"clue", "act", "reason", "eval", "refine", "summarize"})


def render_prompt(name: str, **slots: object) -> str:
    text = resources.files("videoquorum.prompts").joinpath(f"{name}.txt").read_text()
    return text.format(**slots)


@dataclass(frozen=True)
class CapabilityRequest:
    """One capability invocation: prompt text plus attached frames."""

    capability: str
    round_index: int
    question_id: str
    agent_id: str
    prompt: str
    frames: tuple[FrameRecord, ...] = ()


@runtime_checkable
class AgentBackend(Protocol):
    identifier: str
    capabilities: frozenset[str]

    def invoke(self, request: CapabilityRequest) -> str: ...


@dataclass
class ScriptedBackend:
    """Replays canned outputs keyed by (capability, round, question id).

    Scenario entries are ``responses[agent][capability][round]`` where the
    value is a string, a mapping from question id (or "*") to a string, or
    a list consumed call by call (the retry path needs two different
    completions for the same slot; the last element repeats). Missing
    entries raise so fixtures stay complete by construction.
    """

    identifier: str
    responses: dict
    capabilities: frozenset[str] = ALL_CAPABILITIES
    calls: list[tuple[str, int, str]] = field(default_factory=list)
    _cursors: dict = field(default_factory=dict, repr=False)

    def invoke(self, request: CapabilityRequest) -> str:
        self.calls.append((request.capability, request.round_index, request.question_id))
        by_round = self.responses.get(request.capability)
        if by_round is None:
            raise ScenarioError(
                f"scenario has no '{request.capability}' entries for agent {self.identifier}"
            )
        entry = by_round.get(str(request.round_index))
        if entry is None:
            raise ScenarioError(
                f"scenario missing {self.identifier}/{request.capability}/round "
                f"{request.round_index}"
            )
        if isinstance(entry, dict):
            entry = entry.get(request.question_id, entry.get("*"))
            if entry is None:
                raise ScenarioError(
                    f"scenario missing {self.identifier}/{request.capability}/round "
                    f"{request.round_index} for question {request.question_id}"
                )
        if isinstance(entry, list):
            key = (request.capability, request.round_index, request.question_id)
            cursor = self._cursors.get(key, 0)
            self._cursors[key] = cursor + 1
            return entry[min(cursor, len(entry) - 1)]
        return entry

    def call_count(self, capability: str) -> int:
        return sum(1 for cap, _, _ in self.calls if cap == capability)


class RemoteChatBackend:
    """Chat-completion endpoint speaking multimodal messages.

    Frames travel as base64 PNG data URLs; transient transport errors and
    5xx responses are retried with exponential backoff.
    """

    def __init__(
        self,
        identifier: str,
        endpoint: str,
        model: str,
        token_env: str | None = None,
        capabilities: frozenset[str] = ALL_CAPABILITIES,
        client: httpx.Client | None = None,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff_seconds: float = 0.5,
    ) -> None:
        self.identifier = identifier
        self.capabilities = capabilities
        self.endpoint = endpoint
        self.model = model
        self._token = os.environ.get(token_env, "") if token_env else ""
        self._client = client or httpx.Client(timeout=timeout)
        self._max_retries = max_retries
        self._backoff = backoff_seconds

    def _messages(self, request: CapabilityRequest) -> list[dict]:
        from .ports import encode_frame_png

        content: list[dict] = [{"type": "text", "text": request.prompt}]
        for frame in request.frames:
            content.append(
                {
                    "type": "image_url",
                    "image_url": {"url": "data:image/png;base64," + encode_frame_png(frame)},
                }
            )
        return [{"role": "user", "content": content}]

    def invoke(self, request: CapabilityRequest) -> str:
        payload = {"model": self.model, "messages": self._messages(request)}
        headers = {"Authorization": f"Bearer {self._token}"} if self._token else {}
        last: Exception | None = None
        for attempt in range(self._max_retries):
            try:
                resp = self._client.post(self.endpoint, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = exc
                time.sleep(self._backoff * (2**attempt))
                continue
            if resp.status_code >= 500:
                last = TransportFailure(f"{self.endpoint}: status {resp.status_code}")
                time.sleep(self._backoff * (2**attempt))
                continue
            if resp.status_code != 200:
                raise BackendError(f"{self.identifier}: status {resp.status_code}: {resp.text}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, ValueError) as exc:
                raise BackendError(f"{self.identifier}: malformed completion payload") from exc
        raise TransportFailure(f"{self.identifier}: failed after {self._max_retries} attempts") from last


def load_scenario(path: str | Path) -> tuple[list[ScriptedBackend], dict]:
    """Build scripted backends from a scenario file; returns (backends, extras)
    where extras holds any embedded question/video/config sections."""
    payload = json.loads(Path(path).read_text())
    backends = []
    responses = payload.get("responses", {})
    for spec in payload.get("agents", []):
        agent_id = spec["id"]
        caps = frozenset(spec.get("capabilities", sorted(ALL_CAPABILITIES)))
        backends.append(
            ScriptedBackend(
                identifier=agent_id,
                responses=responses.get(agent_id, {}),
                capabilities=caps,
            )
        )
    if not backends:
        raise ScenarioError(f"{path}: scenario defines no agents")
    extras = {k: v for k, v in payload.items() if k not in ("agents", "responses")}
    return backends, extras


def parse_option_label(text: str, labels: Sequence[str]) -> str | None:
    """Extract an option label from a completion, or None when ambiguous.

    Tried in order: the bare label; a label leading the reply ("B) ...",
    "(b).", "B:"); an "answer is B" phrase; a single distinct label used as
    a standalone word anywhere.
    """
    if not text:
        return None
    stripped = text.strip()
    by_upper = {lab.upper(): lab for lab in labels}
    if stripped.upper() in by_upper:
        return by_upper[stripped.upper()]
    alternatives = "|".join(re.escape(lab) for lab in labels)
    lead = re.match(rf"^\W*({alternatives})(?:[).:\],-]|\s|$)", stripped, re.IGNORECASE)
    if lead:
        return by_upper[lead.group(1).upper()]
    phrase = re.search(
        rf"answer\s*(?:is|:)?\s*\(?({alternatives})\)?(?:\W|$)", stripped, re.IGNORECASE
    )
    if phrase:
        return by_upper[phrase.group(1).upper()]
    found = {
        by_upper[m.group(1).upper()]
        for m in re.finditer(rf"\b({alternatives})\b", stripped, re.IGNORECASE)
    }
    if len(found) == 1:
        return found.pop()
    return None


def parse_ratings(text: str, count: int, default: int = 5) -> list[int]:
    """First ``count`` ratings from a completion, clamped to [1, 10];
    missing values default to the midpoint. Handles "x/10" forms and
    "Agent N:" prefixes."""
    text = text or ""
    numbers = [int(m.group(1)) for m in re.finditer(r"(\d+)\s*/\s*10", text)]
    if len(numbers) < count:
        cleaned = re.sub(r"\bagents?\s*#?\d+\b", "", text, flags=re.IGNORECASE)
        numbers = [int(m.group()) for m in re.finditer(r"-?\d+", cleaned)]
    ratings = []
    for i in range(count):
        value = numbers[i] if i < len(numbers) else default
        if value != max(1, min(10, value)):
            logger.warning("rating %r out of range, clamping", value)
        ratings.append(max(1, min(10, value)))
    if len(numbers) < count:
        logger.warning("expected %d ratings, got %d; defaulting the rest to %d", count, len(numbers), default)
    return ratings

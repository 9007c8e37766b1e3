"""Benchmark manifests: one entry per (video, question, options, optional
subtitles, optional gold label)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .alliance import Option, Question
from .errors import ManifestError


@dataclass(frozen=True)
class ManifestEntry:
    video: str
    question: Question
    gold: str | None = None


def _parse_options(raw) -> tuple[Option, ...]:
    options = []
    for item in raw:
        if isinstance(item, str):
            options.append(Option(label=item))
        else:
            options.append(Option(label=item["label"], text=item.get("text", "")))
    return tuple(options)


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    raw_entries = payload["questions"] if isinstance(payload, dict) else payload
    entries: list[ManifestEntry] = []
    for i, raw in enumerate(raw_entries):
        qid = raw.get("id", f"q{i + 1:03d}")
        try:
            question = Question(
                id=qid,
                text=raw["question"],
                options=_parse_options(raw["options"]),
                subtitles=raw.get("subtitles"),
            )
        except (KeyError, ValueError) as exc:
            raise ManifestError(f"manifest entry {qid}: {exc}") from exc
        gold = raw.get("gold")
        if gold is not None and gold not in question.labels:
            raise ManifestError(f"manifest entry {qid}: gold {gold!r} is not an option label")
        if "video" not in raw:
            raise ManifestError(f"manifest entry {qid}: missing video")
        entries.append(ManifestEntry(video=raw["video"], question=question, gold=gold))
    if not entries:
        raise ManifestError(f"{path}: empty manifest")
    return entries

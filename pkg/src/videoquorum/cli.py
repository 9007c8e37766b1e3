"""Command-line surface: ``partition``, ``team``, ``run``, and ``replay``.

Exit codes: 0 success, 1 config error, 2 backend/transport error,
3 partial failure (some questions errored).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .alliance import Option, Question, TeamingReport
from .backends import load_scenario
from .config import RunConfig, load_config
from .errors import (
    BackendError,
    ConfigError,
    IngestError,
    ScenarioError,
    TransportFailure,
    VideoQuorumError,
)
from .manifest import load_manifest
from .novelty import dump_csv
from .pipeline import build_context
from .runner import build_backends, run_manifest, run_teaming, trace_line

logger = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="TOML config file")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--max-blocks", type=int, default=None, dest="max_blocks")
    parser.add_argument("--preview-frames", type=int, default=None, dest="preview_frames")
    parser.add_argument("--action-frames", type=int, default=None, dest="action_frames")
    parser.add_argument(
        "--retention-threshold", type=float, default=None, dest="retention_threshold"
    )
    parser.add_argument("--consensus-mode", default=None, dest="consensus_mode")
    parser.add_argument("--stop-mode", default=None, dest="stop_mode")
    parser.add_argument("--max-rounds", type=int, default=None, dest="max_rounds")
    parser.add_argument("--team-size", type=int, default=None, dest="team_size")
    parser.add_argument("--scenario", default=None, dest="scenario_path")


_OVERRIDE_KEYS = (
    "seed",
    "max_blocks",
    "preview_frames",
    "action_frames",
    "retention_threshold",
    "consensus_mode",
    "stop_mode",
    "max_rounds",
    "team_size",
    "scenario_path",
)


def _config_from(args: argparse.Namespace) -> RunConfig:
    overrides = {key: getattr(args, key, None) for key in _OVERRIDE_KEYS}
    return load_config(args.config, overrides)


def cmd_partition(args: argparse.Namespace) -> int:
    config = _config_from(args)
    ctx = build_context(args.video, config)
    partition = ctx.partition
    document = {
        "video_id": ctx.source.identifier,
        "duration": ctx.source.duration_seconds,
        "boundaries": list(partition.boundaries),
        "heads": list(partition.provenance),
        "block_count": partition.block_count,
    }
    text = json.dumps(document, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.novelty_csv and ctx.outcome.signal is not None:
        dump_csv(args.novelty_csv, ctx.outcome.signal, ctx.outcome.cues)
    return 0


def cmd_team(args: argparse.Namespace) -> int:
    config = _config_from(args)
    entries = load_manifest(args.manifest)
    backends = build_backends(config)
    report = run_teaming(entries, config, backends)
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    Path(args.out).write_text(text + "\n")
    print(f"selected agents: {', '.join(report.selected)}")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    config = _config_from(args)
    entries = load_manifest(args.manifest)
    backends = build_backends(config)
    report = None
    if args.teaming_report:
        report = TeamingReport.from_dict(json.loads(Path(args.teaming_report).read_text()))
    results, summary = run_manifest(
        entries, config, backends, traces_path=args.traces, teaming_report=report
    )
    text = json.dumps(summary.to_dict(), indent=2, sort_keys=True)
    if args.summary:
        Path(args.summary).write_text(text + "\n")
    print(text)
    return 3 if summary.errors else 0


def cmd_replay(args: argparse.Namespace) -> int:
    """Deterministic replay of a self-contained scripted scenario."""
    config = _config_from(args)
    backends, extras = load_scenario(args.scenario)
    if "question" not in extras or "video" not in extras:
        raise ScenarioError(f"{args.scenario}: replay needs embedded question and video sections")
    q = extras["question"]
    question = Question(
        id=q.get("id", "replay"),
        text=q["text"],
        options=tuple(
            Option(label=o["label"], text=o.get("text", "")) if isinstance(o, dict) else Option(label=o)
            for o in q["options"]
        ),
        subtitles=q.get("subtitles"),
    )
    ctx = build_context(extras["video"], config)
    from .alliance import PoolMember

    pool = [PoolMember(backend=b) for b in backends]
    trace = ctx.deliberation.run_question(question, pool)
    line = trace_line(trace)
    if args.out:
        Path(args.out).write_text(line + "\n")
    print(line)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="videoquorum",
        description="Event-partitioned, multi-agent long-video question answering",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="partition a video into event blocks")
    p.add_argument("video", help="frame directory, container file, or synth:// URI")
    p.add_argument("--out", type=Path, default=None, help="write the JSON document here")
    p.add_argument("--novelty-csv", type=Path, default=None, dest="novelty_csv")
    _add_common(p)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("team", help="run agent teaming over a sample manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("--out", type=Path, required=True, help="teaming report destination")
    _add_common(p)
    p.set_defaults(func=cmd_team)

    p = sub.add_parser("run", help="answer a benchmark manifest end to end")
    p.add_argument("manifest", type=Path)
    p.add_argument("--traces", type=Path, default=None, help="JSONL trace destination")
    p.add_argument("--summary", type=Path, default=None, help="summary JSON destination")
    p.add_argument("--teaming-report", type=Path, default=None, dest="teaming_report")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="replay a self-contained scripted scenario")
    p.add_argument("scenario", type=Path)
    p.add_argument("--out", type=Path, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ConfigError, ScenarioError, IngestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TransportFailure, BackendError) as exc:
        print(f"backend error: {exc}", file=sys.stderr)
        return 2
    except VideoQuorumError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

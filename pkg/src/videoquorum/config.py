"""Run configuration: engine constants, backend wiring, and TOML loading.

Defaults follow the evaluated settings: 4 preview frames, 16 action frames,
retention threshold 0.8, at most 6 blocks, 200 feature frames, smoothing
window 5, EMA decay 0.9, Gram-split penalty 1.4, pooling resolutions
{0.25, 0.5, 1.0} s, fusion base weights 0.20/0.30/0.35/0.05, and color
channel weights 0.55/0.35/0.10. CLI flags override file values.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError


@dataclass(frozen=True)
class AgentSpec:
    """One backend in the agent library."""

    id: str
    kind: str = "scripted"  # scripted | remote
    endpoint: str = ""
    model: str = ""
    token_env: str = ""


@dataclass
class RunConfig:
    # frame budgets and selection
    preview_frames: int = 4
    action_frames: int = 16
    retention_threshold: float = 0.8
    scoring_frames_per_block: int = 4
    p1_mode: str = "random-whole"  # random-whole | per-event-block
    p2_mode: str = "event-blocks"  # event-blocks | uniform-blocks

    # partitioning
    max_blocks: int = 6
    max_feature_frames: int = 200
    min_segment_floor: float = 2.0
    smoothing_window: int = 5
    ema_decay: float = 0.9
    color_weights: tuple[float, float, float] = (0.55, 0.35, 0.10)
    fusion_base_weights: tuple[float, float, float, float] = (0.20, 0.30, 0.35, 0.05)
    pool_resolutions: tuple[float, ...] = (0.25, 0.5, 1.0)
    pelt_lambda_factors: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    pelt_strength_quantile: float = 0.6
    ssm_peak_quantile: float = 0.7
    kts_penalty: float = 1.4
    nms_strength_first: bool = False

    # deliberation
    consensus_mode: str = "full"  # full | majority
    stop_mode: str = "consensus"  # consensus | fixed-rounds | no-prune-sum | no-prune-maj
    max_rounds: int | None = None
    team_size: int = 3

    # execution
    seed: int = 0
    agent_concurrency: int | None = None
    question_concurrency: int = 1

    # model ports
    embedder_kind: str = "synthetic"  # synthetic | remote
    embedder_dimension: int = 384
    embedder_endpoint: str = ""
    similarity_kind: str = "synthetic"  # synthetic | remote
    similarity_endpoint: str = ""

    # agent library
    agents: tuple[AgentSpec, ...] = ()
    scenario_path: str = ""

    def validate(self) -> None:
        if not 0.0 < self.retention_threshold < 1.0:
            raise ConfigError(f"retention_threshold must be in (0, 1), got {self.retention_threshold}")
        if self.action_frames < 1:
            raise ConfigError("action_frames must be >= 1")
        if self.preview_frames < 1:
            raise ConfigError("preview_frames must be >= 1")
        if self.max_blocks < 1:
            raise ConfigError("max_blocks must be >= 1")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise ConfigError("smoothing_window must be a positive odd integer")
        if self.max_feature_frames < 2:
            raise ConfigError("max_feature_frames must be >= 2")
        if self.min_segment_floor <= 0:
            raise ConfigError("min_segment_floor must be positive")
        if self.consensus_mode not in ("full", "majority"):
            raise ConfigError(f"unknown consensus_mode: {self.consensus_mode}")
        if self.stop_mode not in ("consensus", "fixed-rounds", "no-prune-sum", "no-prune-maj"):
            raise ConfigError(f"unknown stop_mode: {self.stop_mode}")
        if self.p1_mode not in ("random-whole", "per-event-block"):
            raise ConfigError(f"unknown p1_mode: {self.p1_mode}")
        if self.p2_mode not in ("event-blocks", "uniform-blocks"):
            raise ConfigError(f"unknown p2_mode: {self.p2_mode}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1 when set")
        if self.team_size < 1:
            raise ConfigError("team_size must be >= 1")

    def effective_max_rounds(self, pool_size: int) -> int:
        """Consensus mode is naturally bounded by the pool size; the other
        stop modes need an explicit cap (default 3)."""
        if self.stop_mode == "consensus":
            return pool_size
        return self.max_rounds if self.max_rounds is not None else 3

    def effective_agent_workers(self, pool_size: int) -> int:
        return self.agent_concurrency if self.agent_concurrency else pool_size


_TUPLE_FIELDS = {
    "color_weights",
    "fusion_base_weights",
    "pool_resolutions",
    "pelt_lambda_factors",
}


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a config from an optional TOML file plus override pairs
    (overrides win, mirroring CLI flags)."""
    values: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                payload = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        values.update(payload.get("engine", {}))
        values.update(payload.get("deliberation", {}))
        values.update(payload.get("ports", {}))
        values.update(payload.get("execution", {}))
        agents = tuple(AgentSpec(**spec) for spec in payload.get("agents", []))
        if agents:
            values["agents"] = agents
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for name in _TUPLE_FIELDS & set(values):
        values[name] = tuple(values[name])
    try:
        config = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    config.validate()
    return config

"""End-to-end glue: open a source, run the partitioning pipeline, and
assemble the per-video context the deliberation layer works against.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

from .alliance import Deliberation
from .changepoint import BoundaryCandidate, pelt_head
from .config import RunConfig
from .embseg import (
    EmbeddingGrid,
    GramMatrix,
    foote_novelty,
    kts_segment,
    resample_embeddings,
)
from .features import EmbedderPort, SyntheticEmbedderPort, compute_features
from .ingest import VideoSource, decode_frames, open_source, uniform_sample
from .novelty import NoveltySignal, compute_novelty
from .partition import (
    Partition,
    event_partition,
    kts_min_bins,
    min_segment_length,
    ssm_half_width,
    ssm_min_gap,
)
from .ports import RemoteEmbedderPort, RemoteSimilarityPort
from .selection import HashSimilarityPort, SimilarityPort

logger = logging.getLogger(__name__)


@dataclass
class PartitionOutcome:
    partition: Partition
    signal: NoveltySignal | None
    cues: dict | None
    grid: EmbeddingGrid | None
    candidates: list[BoundaryCandidate]
    seconds: float


@dataclass
class VideoContext:
    source: VideoSource
    outcome: PartitionOutcome
    deliberation: Deliberation

    @property
    def partition(self) -> Partition:
        return self.outcome.partition


def make_embedder(config: RunConfig) -> EmbedderPort:
    if config.embedder_kind == "remote":
        return RemoteEmbedderPort(
            dimension=config.embedder_dimension, base_url=config.embedder_endpoint
        )
    return SyntheticEmbedderPort(dimension=config.embedder_dimension, seed=config.seed)


def make_similarity_port(config: RunConfig) -> SimilarityPort:
    if config.similarity_kind == "remote":
        return RemoteSimilarityPort(base_url=config.similarity_endpoint)
    return HashSimilarityPort(seed=config.seed)


def partition_video(
    source: VideoSource, config: RunConfig, embedder: EmbedderPort | None = None
) -> PartitionOutcome:
    """Sampled decode -> features -> fused novelty -> three boundary heads
    -> merge/NMS/truncate. Degenerate clips fall back to a single block."""
    started = time.perf_counter()
    duration = source.duration_seconds
    min_gap = min_segment_length(duration, config.min_segment_floor)
    if source.frame_count < 3:
        partition = Partition(boundaries=(0.0, duration))
        return PartitionOutcome(partition, None, None, None, [], time.perf_counter() - started)
    embedder = embedder or make_embedder(config)
    grid_idx = uniform_sample(source, config.max_feature_frames)
    frames = decode_frames(source, grid_idx)
    features = compute_features(frames, embedder)
    signal, cues = compute_novelty(features, window=config.smoothing_window)

    pelt_candidates = pelt_head(
        signal,
        min_segment_seconds=min_gap,
        duration=duration,
        resolutions=config.pool_resolutions,
        lambda_factors=config.pelt_lambda_factors,
        strength_quantile=config.pelt_strength_quantile,
    )
    grid = resample_embeddings(features.timestamps, features.embeddings)
    gram = GramMatrix.from_vectors(grid.vectors) if grid.count >= 2 else None
    ssm_candidates = foote_novelty(
        grid,
        half_width_bins=ssm_half_width(min_gap),
        min_gap_seconds=ssm_min_gap(min_gap),
        peak_quantile=config.ssm_peak_quantile,
        gram=gram,
    )
    kts_candidates = []
    if gram is not None:
        kts_candidates = kts_segment(
            gram, grid.times, penalty=config.kts_penalty, min_bins=kts_min_bins(min_gap)
        )
    partition = event_partition(
        duration,
        pelt_candidates,
        ssm_candidates,
        kts_candidates,
        min_gap=min_gap,
        max_blocks=config.max_blocks,
        strength_first=config.nms_strength_first,
    )
    candidates = [*pelt_candidates, *ssm_candidates, *kts_candidates]
    seconds = time.perf_counter() - started
    logger.info(
        "partitioned %s into %d blocks in %.2fs (%d candidates)",
        source.identifier,
        partition.block_count,
        seconds,
        len(candidates),
    )
    return PartitionOutcome(partition, signal, cues, grid, candidates, seconds)


def build_context(
    video: str | VideoSource,
    config: RunConfig,
    embedder: EmbedderPort | None = None,
    similarity_port: SimilarityPort | None = None,
) -> VideoContext:
    source = video if isinstance(video, VideoSource) else open_source(video)
    outcome = partition_video(source, config, embedder)
    deliberation = Deliberation(
        source=source,
        partition=outcome.partition,
        similarity_port=similarity_port or make_similarity_port(config),
        config=config,
    )
    return VideoContext(source=source, outcome=outcome, deliberation=deliberation)

"""Training-free long-video question answering.

The engine partitions a video into event blocks (fused novelty +
change-point heads), scores blocks against each agent's perception clue,
samples an action frame budget across retained blocks, and runs a
multi-round answer / peer-review / prune deliberation over pluggable
model backends.
"""

from .alliance import (
    DeliberationTrace,
    Option,
    PoolMember,
    Question,
    TeamingReport,
    check_consensus,
    team_agents,
)
from .config import RunConfig, load_config
from .ingest import FrameRecord, SampleGrid, VideoSource, decode_frames, open_source, uniform_sample
from .partition import Partition, min_segment_length
from .pipeline import VideoContext, build_context, partition_video

__version__ = "0.1.0"

__all__ = [
    "DeliberationTrace",
    "FrameRecord",
    "Option",
    "Partition",
    "PoolMember",
    "Question",
    "RunConfig",
    "SampleGrid",
    "TeamingReport",
    "VideoContext",
    "VideoSource",
    "build_context",
    "check_consensus",
    "decode_frames",
    "load_config",
    "min_segment_length",
    "open_source",
    "partition_video",
    "team_agents",
    "uniform_sample",
    "__version__",
]

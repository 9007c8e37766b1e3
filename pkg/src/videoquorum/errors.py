"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class VideoQuorumError(Exception):
    """Base class for all engine errors."""


class IngestError(VideoQuorumError):
    """Unreadable source, zero frames, or a decode failure."""


class ConfigError(VideoQuorumError):
    """Invalid configuration value or malformed config file."""


class PortContractError(VideoQuorumError):
    """A model port returned data violating its contract (e.g. wrong dimension)."""


class TransportFailure(VideoQuorumError):
    """A remote call failed after retries; safe to retry at a higher level."""


class BackendError(VideoQuorumError):
    """An agent backend failed to produce a usable completion."""


class ScenarioError(VideoQuorumError):
    """A scripted scenario file is missing a required entry."""


class ManifestError(ConfigError):
    """A benchmark manifest entry is malformed."""

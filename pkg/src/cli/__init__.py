"""Command-line surface and configuration."""

from .config import ExperimentConfig, RunManifest, StageTimer, load_config, resolve_threads

__all__ = ["ExperimentConfig", "RunManifest", "StageTimer", "load_config", "resolve_threads"]

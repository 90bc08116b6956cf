"""Run configuration: one JSON file with per-module sections, CLI-overridable."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .chunking import ChunkingConfig, DEFAULT_BOUNDARY_MARKERS
from .dedup import DedupConfig
from .errors import ConfigError
from .extraction import ExtractionConfig
from .gateway import GatewayConfig
from .model import TIERS
from .training import RolloutConfig


@dataclass
class RunConfig:
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    dedup: DedupConfig = field(default_factory=DedupConfig)
    rollout: RolloutConfig = field(default_factory=RolloutConfig)
    skill_library: str = ""
    output_dir: str = "out"
    fixtures_dir: str = ""

    def validate(self) -> None:
        self.gateway.validate()
        self.chunking.validate()
        self.extraction.validate()
        self.dedup.validate()
        self.rollout.validate()


def load_run_config(path: str | Path | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path}: top level must be a JSON object")

    gw = data.get("gateway", {})
    for key in gw:
        if not hasattr(config.gateway, key):
            raise ConfigError(f"unknown gateway config key {key!r}")
        setattr(config.gateway, key, gw[key])

    ch = data.get("chunk", {})
    config.chunking = ChunkingConfig(
        target_size=ch.get("target_size", 1200),
        overlap=ch.get("overlap", 200),
        boundary_markers=tuple(ch.get("boundary_markers", DEFAULT_BOUNDARY_MARKERS)),
    )

    ex = data.get("extraction", {})
    config.extraction = ExtractionConfig(
        tiers=tuple(ex.get("tiers", TIERS)),
        skills_enabled=ex.get("skills_enabled", True),
        max_skills_injected=ex.get("max_skills_injected", 20),
        prompt_dir=ex.get("prompt_dir", ""),
        max_parallel_chunks=ex.get("max_parallel_chunks", 4),
    )

    dd = data.get("dedup", {})
    config.dedup = DedupConfig(
        entity_sim_threshold=dd.get("entity_sim_threshold", 0.90),
        edge_sim_threshold=dd.get("edge_sim_threshold", 0.85),
        fusion_mode=dd.get("fusion_mode", "concat_unique"),
    )

    ro = data.get("rollout", {})
    config.rollout = RolloutConfig(
        k_samples=ro.get("k_samples", 4),
        temperature=ro.get("temperature", 0.8),
        train_match_threshold=ro.get("train_match_threshold", 0.70),
    )

    paths = data.get("paths", {})
    config.skill_library = paths.get("skill_library", "")
    config.output_dir = paths.get("output_dir", "out")
    config.fixtures_dir = paths.get("fixtures_dir", "")
    if config.fixtures_dir and not config.gateway.fixtures_dir:
        config.gateway.fixtures_dir = config.fixtures_dir
    config.validate()
    return config

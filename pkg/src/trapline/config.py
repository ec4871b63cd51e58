"""Flat ``key = value`` configuration with one section per pipeline stage.

Hand-editable in the field; every CLI flag overrides its config entry. The
TRAPLINE_CONFIG environment variable supplies a default file path.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field
from pathlib import Path

ENV_VAR = "TRAPLINE_CONFIG"


@dataclass
class PipelineConfig:
    archive: Path = Path("archive")
    videos: Path = Path("videos")
    store: Path = Path("store")
    schema_file: Path | None = None

    # encode
    encoder: str = "auto"  # auto | builtin | ffmpeg | /path/to/binary
    encoder_args: list[str] = field(default_factory=list)
    fps: float = 30.0
    composite: bool = True

    # segment
    provider: str = "stub"  # stub | csv | command
    provider_command: list[str] = field(default_factory=list)
    detections_dir: Path | None = None
    threshold: float = 0.90
    gap: int = 2
    min_len: int = 1

    # reid
    library: Path | None = None
    embedder: str = "hash"  # hash | csv | command
    embedder_command: list[str] = field(default_factory=list)
    embeddings_csv: Path | None = None
    k: int = 5
    frames_per_segment: int = 5
    metric: str = "l2"

    # serve
    host: str = "127.0.0.1"
    port: int = 8008
    ui_dir: Path | None = None

    # ingest / run
    cards: list[Path] = field(default_factory=list)
    workers: int = 4


def _split_command(raw: str) -> list[str]:
    import shlex

    return shlex.split(raw)


def load_config(path: Path | None) -> PipelineConfig:
    """Read a config file; missing path (and no TRAPLINE_CONFIG) gives defaults."""
    cfg = PipelineConfig()
    if path is None:
        env = os.environ.get(ENV_VAR)
        if env:
            path = Path(env)
    if path is None:
        return cfg
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)

    def get(section: str, key: str, fallback=None):
        return parser.get(section, key, fallback=fallback)

    if parser.has_section("paths"):
        cfg.archive = Path(get("paths", "archive", cfg.archive))
        cfg.videos = Path(get("paths", "videos", cfg.videos))
        cfg.store = Path(get("paths", "store", cfg.store))
        schema = get("paths", "schema")
        cfg.schema_file = Path(schema) if schema else None
    if parser.has_section("encode"):
        cfg.encoder = get("encode", "encoder", cfg.encoder)
        cfg.encoder_args = _split_command(get("encode", "args", ""))
        cfg.fps = parser.getfloat("encode", "fps", fallback=cfg.fps)
        cfg.composite = parser.getboolean("encode", "composite", fallback=cfg.composite)
    if parser.has_section("segment"):
        cfg.provider = get("segment", "provider", cfg.provider)
        cfg.provider_command = _split_command(get("segment", "command", ""))
        detections = get("segment", "detections_dir")
        cfg.detections_dir = Path(detections) if detections else None
        cfg.threshold = parser.getfloat("segment", "threshold", fallback=cfg.threshold)
        cfg.gap = parser.getint("segment", "gap", fallback=cfg.gap)
        cfg.min_len = parser.getint("segment", "min_len", fallback=cfg.min_len)
    if parser.has_section("reid"):
        library = get("reid", "library")
        cfg.library = Path(library) if library else None
        cfg.embedder = get("reid", "embedder", cfg.embedder)
        cfg.embedder_command = _split_command(get("reid", "command", ""))
        embeddings = get("reid", "embeddings_csv")
        cfg.embeddings_csv = Path(embeddings) if embeddings else None
        cfg.k = parser.getint("reid", "k", fallback=cfg.k)
        cfg.frames_per_segment = parser.getint(
            "reid", "frames_per_segment", fallback=cfg.frames_per_segment
        )
        cfg.metric = get("reid", "metric", cfg.metric)
    if parser.has_section("serve"):
        cfg.host = get("serve", "host", cfg.host)
        cfg.port = parser.getint("serve", "port", fallback=cfg.port)
        ui = get("serve", "ui")
        cfg.ui_dir = Path(ui) if ui else None
    if parser.has_section("run"):
        cards = get("run", "cards", "")
        cfg.cards = [Path(c) for c in cards.split() if c]
        cfg.workers = parser.getint("run", "workers", fallback=cfg.workers)
    return cfg

"""End-to-end orchestration: ingest, segment, encode, import drafts.

Each burrow-day is an independent unit of work; a failure in one stage halts
that burrow-day only. Every stage is a no-op when its artifact already
exists, so rerunning a completed batch changes nothing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import segmenter, videopack
from .config import PipelineConfig
from .ingest import CardSpec, IngestReport, View, ingest_cards
from .providers import (
    CsvDetectionProvider,
    DetectionProvider,
    ProviderError,
    StubDetectionProvider,
    SubprocessDetectionProvider,
)
from .store import (
    AUTO_EVENT,
    Annotation,
    AnnotationStore,
    EventSchema,
    Stage,
    StatusLog,
    load_event_schema,
)

log = logging.getLogger(__name__)

AUTO_AUTHOR = "segmenter"


@dataclass
class StageResult:
    recording_id: str
    stage: str
    outcome: str  # "done" | "no-op" | "error"
    detail: str = ""


@dataclass
class PipelineReport:
    ingest_reports: dict[str, IngestReport] = field(default_factory=dict)
    stages: list[StageResult] = field(default_factory=list)

    def add(self, rid: str, stage: str, outcome: str, detail: str = "") -> None:
        self.stages.append(StageResult(rid, stage, outcome, detail))
        level = logging.ERROR if outcome == "error" else logging.INFO
        log.log(level, "%s %s: %s %s", rid, stage, outcome, detail)


def make_detection_provider(cfg: PipelineConfig, recording_id: str) -> DetectionProvider:
    if cfg.provider == "stub":
        return StubDetectionProvider()
    if cfg.provider == "csv":
        if cfg.detections_dir is None:
            raise ProviderError("csv detection provider needs detections_dir")
        return CsvDetectionProvider(cfg.detections_dir / f"{recording_id}.csv")
    if cfg.provider == "command":
        if not cfg.provider_command:
            raise ProviderError("command detection provider needs a command")
        return SubprocessDetectionProvider(cfg.provider_command)
    raise ProviderError(f"unknown detection provider {cfg.provider!r}")


def segments_csv_path(cfg: PipelineConfig, recording_id: str) -> Path:
    return cfg.store / "segments" / f"{recording_id}.csv"


def video_path(cfg: PipelineConfig, recording_id: str) -> Path:
    return cfg.videos / f"{recording_id}.mp4"


def composite_path(cfg: PipelineConfig, burrow: str, date: str) -> Path:
    return cfg.videos / f"{burrow}-C-{date}.mp4"


def _segment_stage(
    cfg: PipelineConfig, report: PipelineReport, rid: str, plan: videopack.EncodePlan
) -> None:
    out_csv = segments_csv_path(cfg, rid)
    if out_csv.exists():
        report.add(rid, "segment", "no-op", "segments exist")
        return
    provider = make_detection_provider(cfg, rid)
    try:
        scan = segmenter.run_detection_pass(rid, [f.path for f in plan.frames], provider)
    finally:
        close = getattr(provider, "close", None)
        if close:
            close()
    segments = segmenter.group_detections(
        rid, scan.detections, cfg.threshold, cfg.gap, cfg.min_len
    )
    raw = {
        i: [(d.bbox[0], d.bbox[1], d.bbox[2], d.bbox[3], d.confidence, d.label) for d in dets]
        for i, dets in enumerate(scan.detections)
        if dets
    }
    from .providers import write_detections_csv

    write_detections_csv(out_csv.with_suffix(".detections.csv"), raw)
    segmenter.write_segments_csv(out_csv, segments)
    report.add(rid, "segment", "done", f"{len(segments)} draft segments")


def _encode_stage(
    cfg: PipelineConfig,
    report: PipelineReport,
    rid: str,
    plan: videopack.EncodePlan,
    encoder: videopack.EncoderConfig,
) -> videopack.VideoAsset | None:
    out = video_path(cfg, rid)
    if out.exists():
        report.add(rid, "encode", "no-op", "video exists")
        from .mp4 import probe_mp4

        info = probe_mp4(out)
        return videopack.VideoAsset(
            out, info.frame_count, info.fps, info.duration, info.width, info.height
        )
    asset = videopack.encode_day(plan, out, encoder)
    if asset is None:
        report.add(rid, "encode", "no-op", "empty day")
    else:
        report.add(rid, "encode", "done", f"{asset.frame_count} frames")
    return asset


def _import_stage(
    cfg: PipelineConfig, report: PipelineReport, store: AnnotationStore, rid: str
) -> None:
    seg_csv = segments_csv_path(cfg, rid)
    if not seg_csv.exists():
        report.add(rid, "import", "no-op", "no segments file")
        return
    imported = 0
    for i, seg in enumerate(segmenter.read_segments_csv(seg_csv)):
        ann_id = f"auto-{rid}-{i:04d}"
        if store.get(ann_id) is not None:
            continue
        store.upsert(
            Annotation(
                annotation_id=ann_id,
                recording_id=rid,
                start_frame=seg.start_frame,
                end_frame=seg.end_frame,
                event=AUTO_EVENT,
                author=AUTO_AUTHOR,
            )
        )
        imported += 1
    report.add(rid, "import", "done" if imported else "no-op", f"{imported} drafts")


def run_pipeline(cfg: PipelineConfig, cards: list[CardSpec]) -> PipelineReport:
    """Process a batch of cards through every stage."""
    report = PipelineReport()
    status = StatusLog(cfg.store)
    schema = load_event_schema(cfg.schema_file) if cfg.schema_file else EventSchema([])
    store = AnnotationStore(cfg.store, schema)
    encoder = videopack.resolve_encoder(cfg.encoder, cfg.encoder_args)

    report.ingest_reports = ingest_cards(cards, cfg.archive, cfg.workers)
    # Burrow-days are discovered from the archive, not the ingest reports, so
    # a rerun picks up previously ingested days too.
    burrow_days: set[tuple[str, str]] = set()
    for burrow_dir in sorted(cfg.archive.iterdir() if cfg.archive.is_dir() else []):
        if not burrow_dir.is_dir():
            continue
        for view_dir in burrow_dir.iterdir():
            if view_dir.name not in ("O", "F"):
                continue
            for day_dir in view_dir.iterdir():
                if day_dir.is_dir():
                    burrow_days.add((burrow_dir.name, day_dir.name))

    for burrow, date in sorted(burrow_days):
        day_images = 0
        assets: dict[str, videopack.VideoAsset | None] = {}
        plans: dict[str, videopack.EncodePlan] = {}
        for view in View:
            rid = f"{burrow}-{view.value}-{date}"
            plans[view.value] = videopack.plan_day(cfg.archive, rid, cfg.fps)
            day_images += len(plans[view.value])
        status.mark(burrow, date, Stage.INGESTED, day_images)

        # Overhead-only segmentation, then per-camera encode, then composite.
        overhead_rid = f"{burrow}-O-{date}"
        try:
            _segment_stage(cfg, report, overhead_rid, plans["O"])
            status.mark(burrow, date, Stage.SEGMENTED, len(plans["O"]))
        except Exception as exc:
            report.add(overhead_rid, "segment", "error", str(exc))

        encode_failed = False
        for view in View:
            rid = f"{burrow}-{view.value}-{date}"
            try:
                assets[view.value] = _encode_stage(cfg, report, rid, plans[view.value], encoder)
            except Exception as exc:
                report.add(rid, "encode", "error", str(exc))
                assets[view.value] = None
                encode_failed = True

        comp_rid = f"{burrow}-C-{date}"
        if cfg.composite and assets.get("O") and assets.get("F"):
            comp_out = composite_path(cfg, burrow, date)
            if comp_out.exists():
                report.add(comp_rid, "composite", "no-op", "composite exists")
            else:
                try:
                    amap = videopack.align_streams(plans["O"], plans["F"])
                    videopack.compose_side_by_side(
                        assets["O"], assets["F"], amap, comp_out, encoder, cfg.fps
                    )
                    report.add(comp_rid, "composite", "done", f"{len(amap)} frames")
                except Exception as exc:
                    report.add(comp_rid, "composite", "error", str(exc))
                    encode_failed = True
        if not encode_failed:
            status.mark(burrow, date, Stage.ENCODED, day_images)

        try:
            _import_stage(cfg, report, store, overhead_rid)
        except Exception as exc:
            report.add(overhead_rid, "import", "error", str(exc))
    return report

"""trapline: one entry point for every pipeline stage.

Subcommands: ingest, encode, segment, reid, evaluate, serve, report,
schedule, run. Flags override the config file; TRAPLINE_CONFIG names a
default config.
"""

from __future__ import annotations

import argparse
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import evalkit, reid, segmenter, videopack
from .config import PipelineConfig, load_config
from .ingest import CardSpec, ingest_cards
from .pipeline import run_pipeline, segments_csv_path
from .providers import (
    CsvEmbeddingProvider,
    HashEmbeddingProvider,
    SubprocessEmbeddingProvider,
)
from .reportgen import annotation_report, status_report
from .schedule import REFERENCE_WORKLOAD, StageWorkers, WorkloadSpec, estimate_schedule
from .service import AnnotationService, serve_forever
from .store import (
    AnnotationStore,
    EventSchema,
    StatusLog,
    SuggestionCache,
    SuggestionRow,
    load_event_schema,
)

log = logging.getLogger(__name__)


def _cfg_from(args: argparse.Namespace) -> PipelineConfig:
    return load_config(args.config)


def cmd_ingest(args: argparse.Namespace) -> int:
    cards = []
    for source in args.source:
        manifest = args.manifest if args.manifest else source / "manifest.csv"
        cards.append(CardSpec(source, manifest))
    if args.manifest and len(cards) > 1:
        print("--manifest applies to a single --source", file=sys.stderr)
        return 2
    try:
        reports = ingest_cards(cards, args.archive, args.workers)
    except OSError as exc:
        print(f"ingest failed: {exc}", file=sys.stderr)
        return 1
    total_copied = total_skipped = total_errors = 0
    for source, report in reports.items():
        print(
            f"{source}: copied={report.copied} skipped={report.skipped_duplicates} "
            f"errors={len(report.errors)} rate={report.rate:.1f}/s"
        )
        for path, reason in report.errors[:20]:
            print(f"  error: {path}: {reason}", file=sys.stderr)
        total_copied += report.copied
        total_skipped += report.skipped_duplicates
        total_errors += len(report.errors)
    # Nonzero only on total failure: nothing handled and something went wrong.
    if total_copied + total_skipped == 0 and total_errors > 0:
        return 1
    return 0


def cmd_encode(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    encoder = videopack.resolve_encoder(args.encoder or cfg.encoder, cfg.encoder_args)
    fps = args.fps or cfg.fps
    assets = {}
    for view in ("O", "F"):
        rid = f"{args.burrow}-{view}-{args.date}"
        plan = videopack.plan_day(args.archive, rid, fps)
        out = args.out / f"{rid}.mp4"
        try:
            asset = videopack.encode_day(plan, out, encoder)
        except videopack.EncodeError as exc:
            print(f"{rid}: {exc}", file=sys.stderr)
            return 1
        assets[view] = (plan, asset)
        if asset:
            print(f"{rid}: {asset.frame_count} frames -> {out}")
        else:
            print(f"{rid}: empty day, no video")
    if args.composite and assets["O"][1] and assets["F"][1]:
        amap = videopack.align_streams(assets["O"][0], assets["F"][0])
        out = args.out / f"{args.burrow}-C-{args.date}.mp4"
        composite = videopack.compose_side_by_side(
            assets["O"][1], assets["F"][1], amap, out, encoder, fps
        )
        if composite:
            print(f"composite: {composite.frame_count} frames -> {out}")
    return 0


def cmd_segment(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    cfg.provider = args.provider or cfg.provider
    if args.detections_dir:
        cfg.detections_dir = args.detections_dir
    if args.provider_command:
        cfg.provider_command = args.provider_command
    cfg.threshold = args.threshold if args.threshold is not None else cfg.threshold
    cfg.gap = args.gap if args.gap is not None else cfg.gap
    cfg.min_len = args.min_len if args.min_len is not None else cfg.min_len
    archive = args.archive or cfg.archive

    from .pipeline import make_detection_provider

    plan = videopack.plan_day(archive, args.recording)
    try:
        provider = make_detection_provider(cfg, args.recording)
    except Exception as exc:
        print(f"provider unavailable: {exc}", file=sys.stderr)
        return 1
    try:
        scan = segmenter.run_detection_pass(
            args.recording, [f.path for f in plan.frames], provider
        )
    finally:
        close = getattr(provider, "close", None)
        if close:
            close()
    segments = segmenter.group_detections(
        args.recording, scan.detections, cfg.threshold, cfg.gap, cfg.min_len
    )
    out = args.out or segments_csv_path(cfg, args.recording)
    segmenter.write_segments_csv(out, segments)
    print(
        f"{args.recording}: {len(plan.frames)} frames scanned at {scan.rate:.0f}/s, "
        f"{len(scan.unscanned)} unscanned, {len(segments)} draft segments -> {out}"
    )
    return 0


def _make_embedder(name: str, cfg: PipelineConfig):
    if name == "hash":
        return HashEmbeddingProvider()
    if name == "csv":
        if not cfg.embeddings_csv:
            raise ValueError("csv embedder needs embeddings_csv")
        return CsvEmbeddingProvider(cfg.embeddings_csv)
    if name == "command":
        if not cfg.embedder_command:
            raise ValueError("command embedder needs a command")
        return SubprocessEmbeddingProvider(cfg.embedder_command)
    raise ValueError(f"unknown embedder {name!r}")


def cmd_reid(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    library = reid.ReferenceLibrary.from_csv(args.library)
    archive = args.archive or cfg.archive
    try:
        embedder = _make_embedder(args.embedder or cfg.embedder, cfg)
    except Exception as exc:
        print(f"embedder unavailable: {exc}", file=sys.stderr)
        return 1
    segments = segmenter.read_segments_csv(args.segments)
    cache = SuggestionCache(args.store or cfg.store)
    by_recording: dict[str, list] = {}
    for seg in segments:
        by_recording.setdefault(seg.recording_id, []).append(seg)
    try:
        for rid, segs in sorted(by_recording.items()):
            plan = videopack.plan_day(archive, rid)
            rows = []
            for seg in segs:
                for frame in reid.sample_segment_frames(seg, args.frames_per_segment):
                    if frame >= len(plan.frames):
                        continue
                    vec = embedder.embed_path(plan.frames[frame].path)
                    ranked = reid.rank_individuals(library, [vec], args.k, cfg.metric)
                    rows.extend(
                        SuggestionRow(
                            rid, seg.start_frame, seg.end_frame, frame,
                            rank, individual, dist,
                        )
                        for rank, (individual, dist) in enumerate(ranked, start=1)
                    )
            cache.write(rid, rows)
            print(f"{rid}: {len(rows)} suggestion rows")
    finally:
        close = getattr(embedder, "close", None)
        if close:
            close()
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    predicted = segmenter.read_segments_csv(args.pred)
    truth = segmenter.read_segments_csv(args.truth)
    recordings = sorted(
        {s.recording_id for s in predicted} | {s.recording_id for s in truth}
    )
    print("recording_id,tp,fp,fn,precision,recall,f1")
    total = evalkit.ConfusionCounts(0, 0, 0)
    for rid in recordings:
        counts = evalkit.match_segments(
            [s for s in predicted if s.recording_id == rid],
            [s for s in truth if s.recording_id == rid],
        )
        total = evalkit.ConfusionCounts(
            total.tp + counts.tp, total.fp + counts.fp, total.fn + counts.fn
        )
        p, r = evalkit.precision_recall(counts)
        f1 = evalkit.f1_score(p, r)
        fmt = lambda v: "undefined" if v is None else f"{v:.3f}"
        print(f"{rid},{counts.tp},{counts.fp},{counts.fn},{fmt(p)},{fmt(r)},{fmt(f1)}")
    p, r = evalkit.precision_recall(total)
    f1 = evalkit.f1_score(p, r)
    fmt = lambda v: "undefined" if v is None else f"{v:.3f}"
    print(f"TOTAL,{total.tp},{total.fp},{total.fn},{fmt(p)},{fmt(r)},{fmt(f1)}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    schema_file = args.schema or cfg.schema_file
    schema = load_event_schema(schema_file) if schema_file else EventSchema([])
    service = AnnotationService(
        store_dir=args.store or cfg.store,
        schema=schema,
        videos_dir=args.videos or cfg.videos,
        ui_dir=args.ui or cfg.ui_dir,
    )
    serve_forever(service, args.host or cfg.host, args.port if args.port is not None else cfg.port)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    store_dir = args.store or cfg.store
    if args.kind == "annotations":
        store = AnnotationStore(store_dir)
        text = annotation_report(
            store, burrow=args.burrow, date=args.date, event=args.event, animal=args.animal
        )
    else:
        records = StatusLog(store_dir).read_all()
        text = status_report(records, datetime.now(timezone.utc))
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_schedule(args: argparse.Namespace) -> int:
    workload = WorkloadSpec(
        burrows=args.burrows,
        days_per_batch=args.days,
        overhead_card_images=args.overhead_images,
        front_card_images=args.front_images,
        segmentation_rate=args.seg_rate,
        copy_rate=args.copy_rate,
        compression_minutes_per_burrow_day=args.compression_minutes,
    )
    workers = StageWorkers(args.seg_workers, args.copy_workers, args.compress_workers)
    est = estimate_schedule(workload, workers)
    print(
        f"segmentation {est.segmentation_hours:.2f} h + copy {est.copy_hours:.2f} h "
        f"+ compression {est.compression_hours:.2f} h = {est.makespan_hours:.2f} h"
    )
    verdict = "PASS" if est.meets_deadline else "FAIL"
    print(f"{verdict}: deadline {est.deadline_hours:.0f} h")
    return 0 if est.meets_deadline else 1


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _cfg_from(args)
    sources = args.source or cfg.cards
    if not sources:
        print("no cards: pass --source or set [run] cards in the config", file=sys.stderr)
        return 2
    if args.archive:
        cfg.archive = args.archive
    if args.videos:
        cfg.videos = args.videos
    if args.store:
        cfg.store = args.store
    cards = [CardSpec.with_default_manifest(Path(s)) for s in sources]
    report = run_pipeline(cfg, cards)
    failures = [s for s in report.stages if s.outcome == "error"]
    for source, ingest in report.ingest_reports.items():
        print(
            f"{source}: copied={ingest.copied} skipped={ingest.skipped_duplicates} "
            f"errors={len(ingest.errors)}"
        )
    for stage in report.stages:
        print(f"{stage.recording_id} {stage.stage}: {stage.outcome} {stage.detail}")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trapline",
        description="Camera-trap time-lapse pipeline: ingest, segment, encode, annotate.",
    )
    parser.add_argument("--config", type=Path, default=None, help="config file (or TRAPLINE_CONFIG)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="copy SD cards into the archive")
    p.add_argument("--source", type=Path, action="append", required=True)
    p.add_argument("--archive", type=Path, required=True)
    p.add_argument("--manifest", type=Path, default=None)
    p.add_argument("--workers", type=int, default=4)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("encode", help="encode one burrow-day to MP4")
    p.add_argument("--archive", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--burrow", required=True)
    p.add_argument("--date", required=True)
    p.add_argument("--composite", action="store_true")
    p.add_argument("--encoder", default=None)
    p.add_argument("--fps", type=float, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("segment", help="detect and group one recording")
    p.add_argument("--recording", required=True)
    p.add_argument("--provider", default=None, choices=["stub", "csv", "command"])
    p.add_argument("--provider-command", nargs="+", default=None)
    p.add_argument("--detections-dir", type=Path, default=None)
    p.add_argument("--archive", type=Path, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--gap", type=int, default=None)
    p.add_argument("--min-len", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("reid", help="rank identities for sampled segment frames")
    p.add_argument("--library", type=Path, required=True)
    p.add_argument("--segments", type=Path, required=True)
    p.add_argument("--embedder", default=None, choices=["hash", "csv", "command"])
    p.add_argument("--archive", type=Path, default=None)
    p.add_argument("--store", type=Path, default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--frames-per-segment", type=int, default=5)
    p.set_defaults(func=cmd_reid)

    p = sub.add_parser("evaluate", help="score predicted segments against truth")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("serve", help="run the annotation HTTP service")
    p.add_argument("--store", type=Path, default=None)
    p.add_argument("--schema", type=Path, default=None)
    p.add_argument("--videos", type=Path, default=None)
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--ui", type=Path, default=None, help="built UI bundle to serve")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", help="CSV reports for analysis")
    p.add_argument("kind", choices=["annotations", "status"])
    p.add_argument("--store", type=Path, default=None)
    p.add_argument("--burrow", default=None)
    p.add_argument("--date", default=None)
    p.add_argument("--event", default=None)
    p.add_argument("--animal", default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("schedule", help="estimate batch makespan vs the 48 h deadline")
    ref = REFERENCE_WORKLOAD
    p.add_argument("--burrows", type=int, default=ref.burrows)
    p.add_argument("--days", type=int, default=ref.days_per_batch)
    p.add_argument("--overhead-images", type=int, default=ref.overhead_card_images)
    p.add_argument("--front-images", type=int, default=ref.front_card_images)
    p.add_argument("--seg-rate", type=float, default=ref.segmentation_rate)
    p.add_argument("--copy-rate", type=float, default=ref.copy_rate)
    p.add_argument("--compression-minutes", type=float, default=ref.compression_minutes_per_burrow_day)
    p.add_argument("--seg-workers", type=int, default=1)
    p.add_argument("--copy-workers", type=int, default=1)
    p.add_argument("--compress-workers", type=int, default=1)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("run", help="full pipeline over a batch of cards")
    p.add_argument("--source", type=Path, action="append", default=None)
    p.add_argument("--archive", type=Path, default=None)
    p.add_argument("--videos", type=Path, default=None)
    p.add_argument("--store", type=Path, default=None)
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

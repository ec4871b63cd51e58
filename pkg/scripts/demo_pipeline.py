#!/usr/bin/env python3
"""End-to-end demo on synthetic data: card -> archive -> segments -> videos
-> annotation store, then print what to run next to browse the result.

  python scripts/demo_pipeline.py --workdir /tmp/trapline-demo
"""

import argparse
import subprocess
import sys
from pathlib import Path

from trapline.config import PipelineConfig
from trapline.ingest import CardSpec
from trapline.pipeline import run_pipeline
from trapline.store import AnnotationStore


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--workdir", type=Path, default=Path("/tmp/trapline-demo"))
    parser.add_argument("--count", type=int, default=120, help="frames per view")
    args = parser.parse_args()

    card = args.workdir / "card0"
    subprocess.run(
        [
            sys.executable,
            str(Path(__file__).with_name("make_synthetic_card.py")),
            "--out",
            str(card),
            "--count",
            str(args.count),
        ],
        check=True,
    )

    cfg = PipelineConfig(
        archive=args.workdir / "archive",
        videos=args.workdir / "videos",
        store=args.workdir / "store",
        encoder="auto",
        provider="stub",
        threshold=0.9,
    )
    report = run_pipeline(cfg, [CardSpec.with_default_manifest(card)])
    for source, ingest in report.ingest_reports.items():
        print(f"{source}: copied={ingest.copied} rate={ingest.rate:.0f}/s")
    for stage in report.stages:
        print(f"  {stage.recording_id} {stage.stage}: {stage.outcome} {stage.detail}")

    drafts = AnnotationStore(cfg.store).current()
    print(f"\n{len(drafts)} draft segments in the store")
    print("\nbrowse the result with:")
    print(
        f"  trapline serve --store {cfg.store} --videos {cfg.videos} --port 8008"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

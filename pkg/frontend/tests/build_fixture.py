#!/usr/bin/env python3
"""Build a service fixture for the UI round-trip test: one recording with a
20-frame video, a draft segment, an event schema, and cached suggestions."""

import argparse
import io
from pathlib import Path

from PIL import Image

from trapline.mjpeg import mux_mjpeg
from trapline.store import (
    Annotation,
    AnnotationStore,
    SuggestionCache,
    SuggestionRow,
    parse_event_schema,
)

RID = "B07-O-20210314"


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", type=Path, required=True)
    args = parser.parse_args()

    videos = args.out / "videos"
    videos.mkdir(parents=True, exist_ok=True)
    frames = []
    for i in range(20):
        img = Image.new("RGB", (64, 48), (10 * i, 80, 120))
        buf = io.BytesIO()
        img.save(buf, "JPEG")
        frames.append(buf.getvalue())
    mux_mjpeg(frames, 30.0, videos / f"{RID}.mp4", 64, 48)

    schema_text = "event basking\nevent mating id-required\n"
    (args.out / "events.txt").write_text(schema_text)

    store_dir = args.out / "store"
    store = AnnotationStore(store_dir, parse_event_schema(schema_text))
    store.upsert(
        Annotation(
            annotation_id="auto-B07-O-20210314-0000",
            recording_id=RID,
            start_frame=3,
            end_frame=8,
            event="animal-present",
            author="segmenter",
        )
    )

    rows = []
    for sampled in (3, 5, 8):
        for rank, ident in enumerate(["T01", "T02", "T03", "T04", "T05"], start=1):
            rows.append(
                SuggestionRow(RID, 3, 8, sampled, rank, ident, rank / 10 + sampled / 100)
            )
    SuggestionCache(store_dir).write(RID, rows)
    print(f"fixture ready at {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

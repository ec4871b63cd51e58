#!/usr/bin/env python3
"""Generate a synthetic SD card: tiny JPEG frames plus a manifest.csv.

Useful for demos, benchmarks, and exercising the pipeline without camera
hardware. Frames are solid-color JPEGs with a moving bright pixel so videos
visibly advance.

Example:
  python scripts/make_synthetic_card.py --out /tmp/card0 --burrow B07 \
      --date 2021-03-14 --count 200 --views O F
"""

import argparse
import io
from datetime import datetime, timedelta
from pathlib import Path

from PIL import Image


def make_frame(index: int, size: tuple[int, int], color: tuple[int, int, int]) -> bytes:
    img = Image.new("RGB", size, color)
    img.putpixel((index % size[0], index % size[1]), (255, 255, 0))
    buf = io.BytesIO()
    img.save(buf, "JPEG")
    return buf.getvalue()


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--burrow", default="B07")
    parser.add_argument("--date", default="2021-03-14")
    parser.add_argument("--start", default="09:00:00")
    parser.add_argument("--count", type=int, default=100, help="frames per view")
    parser.add_argument("--step", type=int, default=5, help="seconds between frames")
    parser.add_argument("--views", nargs="+", default=["O", "F"], choices=["O", "F"])
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--height", type=int, default=48)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    rows = ["filename,burrow,view,timestamp"]
    colors = {"O": (170, 90, 40), "F": (50, 110, 170)}
    serial = 0
    for view in args.views:
        stamp = datetime.fromisoformat(f"{args.date} {args.start}")
        for i in range(args.count):
            serial += 1
            name = f"IMG_{serial:05d}.JPG"
            (args.out / name).write_bytes(
                make_frame(i, (args.width, args.height), colors[view])
            )
            rows.append(f"{name},{args.burrow},{view},{stamp:%Y-%m-%d %H:%M:%S}")
            stamp += timedelta(seconds=args.step)
    (args.out / "manifest.csv").write_text("\n".join(rows) + "\n")
    print(f"wrote {serial} frames + manifest to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

#!/usr/bin/env python3
"""Measure ingest throughput at several card sizes.

  python scripts/ingest_benchmark.py --sizes 1000 5000 20000
"""

import argparse
import shutil
import tempfile
from datetime import datetime, timedelta
from pathlib import Path

from trapline.ingest import ManifestProvider, ingest_card


def build_card(root: Path, count: int) -> Path:
    card = root / f"card-{count}"
    card.mkdir()
    payload = bytes.fromhex("ffd8ffdb004300ffffd9")  # minimal JPEG-ish stub
    rows = ["filename,burrow,view,timestamp"]
    stamp = datetime(2021, 3, 14, 7, 0, 0)
    for i in range(count):
        name = f"IMG_{i:06d}.JPG"
        (card / name).write_bytes(payload + i.to_bytes(4, "big"))
        rows.append(f"{name},B07,O,{stamp:%Y-%m-%d %H:%M:%S}")
        stamp += timedelta(seconds=2)
    (card / "manifest.csv").write_text("\n".join(rows) + "\n")
    return card


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", type=int, nargs="+", default=[1000, 5000, 20000])
    args = parser.parse_args()

    print("images,copy_s,copy_rate,rerun_s,rerun_rate")
    for count in args.sizes:
        workdir = Path(tempfile.mkdtemp(prefix="trapline-bench-"))
        try:
            card = build_card(workdir, count)
            provider = ManifestProvider(card / "manifest.csv")
            first = ingest_card(card, workdir / "archive", provider)
            assert first.copied == count, first.errors[:3]
            second = ingest_card(card, workdir / "archive", provider)
            assert second.skipped_duplicates == count
            print(
                f"{count},{first.elapsed:.2f},{first.rate:.0f},"
                f"{second.elapsed:.2f},{second.rate:.0f}"
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

import hashlib
import io
from datetime import datetime, timedelta
from pathlib import Path

import pytest
from PIL import Image

from trapline.ingest import CardSpec


@pytest.fixture(scope="session")
def jpeg_bytes():
    """Factory for small JPEG payloads; `tag` makes the bytes unique without
    re-encoding (trailing bytes after EOI are legal)."""
    cache: dict[tuple, bytes] = {}

    def make(width=16, height=12, color=(200, 60, 40), tag=None):
        key = (width, height, color)
        if key not in cache:
            img = Image.new("RGB", (width, height), color)
            buf = io.BytesIO()
            img.save(buf, "JPEG")
            cache[key] = buf.getvalue()
        data = cache[key]
        if tag is not None:
            data += int(tag).to_bytes(8, "big")
        return data

    return make


@pytest.fixture
def make_card(tmp_path, jpeg_bytes):
    """Build a synthetic SD card: images plus a manifest."""

    counter = {"n": 0}

    def build(
        name="card0",
        burrow="B07",
        date="2021-03-14",
        views=("O",),
        count=5,
        start="09:00:00",
        step_s=5,
    ):
        card_dir = tmp_path / name
        card_dir.mkdir()
        rows = ["filename,burrow,view,timestamp"]
        for view in views:
            stamp = datetime.fromisoformat(f"{date} {start}")
            for _ in range(count):
                counter["n"] += 1
                fname = f"IMG_{counter['n']:05d}.JPG"
                (card_dir / fname).write_bytes(jpeg_bytes(tag=counter["n"]))
                rows.append(f"{fname},{burrow},{view},{stamp:%Y-%m-%d %H:%M:%S}")
                stamp += timedelta(seconds=step_s)
        (card_dir / "manifest.csv").write_text("\n".join(rows) + "\n")
        return CardSpec(card_dir, card_dir / "manifest.csv")

    return build


def tree_digest(root: Path) -> dict[str, str]:
    """Relative path -> content hash for every file under root."""
    out = {}
    for path in sorted(root.rglob("*")):
        if path.is_file():
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()
            ).hexdigest()
    return out


@pytest.fixture
def digest_tree():
    return tree_digest

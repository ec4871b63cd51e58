"""Copy camera-trap images off SD cards into the archive tree under canonical names.

The archive layout is ``<root>/<burrow>/<view>/<YYYYMMDD>/<canonical name>``.
Canonical names are ``{burrow}-{V}-{YYYYMMDD}-{HHMMSS}.jpg`` with V one of
``O`` (overhead) or ``F`` (front), which makes them sortable and parseable.
"""

from __future__ import annotations

import csv
import filecmp
import logging
import os
import re
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, time as daytime
from enum import Enum
from pathlib import Path
from typing import Iterable, Protocol, Sequence

log = logging.getLogger(__name__)

# Capture schedule; timestamps outside it are flagged, never rejected.
SCHEDULE_START = daytime(7, 0, 0)
SCHEDULE_END = daytime(20, 0, 0)

IMAGE_SUFFIXES = {".jpg", ".jpeg"}

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


class MetadataError(ValueError):
    """A metadata record could not be parsed or looked up."""


class View(Enum):
    OVERHEAD = "O"
    FRONT = "F"


@dataclass(frozen=True)
class CaptureMeta:
    """Identity of one capture: which camera took it and when."""

    burrow_id: str
    view: View
    timestamp: datetime

    def __post_init__(self) -> None:
        if not self.burrow_id:
            raise MetadataError("empty burrow id")
        if re.search(r"[-/\\]", self.burrow_id):
            raise MetadataError(f"burrow id {self.burrow_id!r} contains a separator")
        if self.timestamp.microsecond:
            raise MetadataError("timestamps have second granularity")

    @property
    def out_of_schedule(self) -> bool:
        t = self.timestamp.time()
        return t < SCHEDULE_START or t > SCHEDULE_END


def parse_capture_meta(record: str | Sequence[str]) -> CaptureMeta:
    """Parse one manifest record (raw CSV line or pre-split row) into CaptureMeta.

    Records are ``filename,burrow,view,timestamp`` with view O or F and
    timestamp ``YYYY-MM-DD HH:MM:SS``.
    """
    if isinstance(record, str):
        try:
            row = next(csv.reader([record]))
        except StopIteration:
            raise MetadataError("empty record") from None
    else:
        row = list(record)
    if len(row) != 4:
        raise MetadataError(f"expected 4 fields, got {len(row)}")
    filename, burrow, view_code, stamp = (f.strip() for f in row)
    if not burrow:
        raise MetadataError(f"{filename}: missing burrow")
    if not view_code:
        raise MetadataError(f"{filename}: missing view")
    try:
        view = View(view_code.upper())
    except ValueError:
        raise MetadataError(f"{filename}: unknown view {view_code!r}") from None
    try:
        ts = datetime.strptime(stamp, TIMESTAMP_FORMAT)
    except ValueError:
        raise MetadataError(f"{filename}: bad timestamp {stamp!r}") from None
    meta = CaptureMeta(burrow, view, ts)
    if meta.out_of_schedule:
        log.debug("%s: capture %s outside 07:00-20:00 schedule", filename, stamp)
    return meta


def canonical_name(meta: CaptureMeta) -> str:
    """Unique archive file name for a capture. Injective over (burrow, view, time)."""
    ts = meta.timestamp
    return f"{meta.burrow_id}-{meta.view.value}-{ts:%Y%m%d}-{ts:%H%M%S}.jpg"


_CANONICAL_RE = re.compile(
    r"^(?P<burrow>[^-/\\]+)-(?P<view>[OF])-(?P<date>\d{8})-(?P<time>\d{6})\.jpg$",
    re.IGNORECASE,
)


def parse_canonical_name(name: str) -> CaptureMeta:
    """Inverse of canonical_name. Raises MetadataError on malformed names."""
    m = _CANONICAL_RE.match(name)
    if not m:
        raise MetadataError(f"not a canonical image name: {name!r}")
    ts = datetime.strptime(m.group("date") + m.group("time"), "%Y%m%d%H%M%S")
    return CaptureMeta(m.group("burrow"), View(m.group("view").upper()), ts)


def recording_id(meta: CaptureMeta) -> str:
    """Recording id ``{burrow}-{V}-{YYYYMMDD}``: one camera, one day."""
    return f"{meta.burrow_id}-{meta.view.value}-{meta.timestamp:%Y%m%d}"


def split_recording_id(rid: str) -> tuple[str, View, str]:
    m = re.match(r"^(?P<burrow>[^-/\\]+)-(?P<view>[OF])-(?P<date>\d{8})$", rid)
    if not m:
        raise ValueError(f"not a recording id: {rid!r}")
    return m.group("burrow"), View(m.group("view")), m.group("date")


def archive_dir(root: Path, meta: CaptureMeta) -> Path:
    return root / meta.burrow_id / meta.view.value / f"{meta.timestamp:%Y%m%d}"


class MetadataProvider(Protocol):
    """Maps a source image file name to its capture metadata."""

    def lookup(self, filename: str) -> CaptureMeta: ...


class ManifestProvider:
    """Reference metadata provider: reads a per-card CSV manifest.

    Expected header: ``filename,burrow,view,timestamp``. An OCR-based provider
    can replace this without touching the ingest code.
    """

    def __init__(self, manifest: Path):
        self._entries: dict[str, CaptureMeta] = {}
        self._bad: dict[str, str] = {}
        with open(manifest, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != [
                "filename",
                "burrow",
                "view",
                "timestamp",
            ]:
                raise MetadataError(f"{manifest}: bad manifest header {header!r}")
            for row in reader:
                if not row:
                    continue
                name = row[0].strip()
                try:
                    self._entries[name] = parse_capture_meta(row)
                except MetadataError as exc:
                    self._bad[name] = str(exc)

    def lookup(self, filename: str) -> CaptureMeta:
        if filename in self._bad:
            raise MetadataError(self._bad[filename])
        try:
            return self._entries[filename]
        except KeyError:
            raise MetadataError(f"no manifest entry for {filename}") from None


@dataclass
class IngestReport:
    """Outcome of one card ingest. copied + skipped_duplicates + len(errors)
    always equals the number of source images examined."""

    copied: int = 0
    skipped_duplicates: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)
    elapsed: float = 0.0
    out_of_schedule: int = 0

    @property
    def rate(self) -> float:
        """Images per second, counting only successfully handled files."""
        if self.elapsed <= 0:
            return 0.0
        return (self.copied + self.skipped_duplicates) / self.elapsed

    @property
    def examined(self) -> int:
        return self.copied + self.skipped_duplicates + len(self.errors)


def _atomic_copy(source: Path, dest: Path) -> None:
    # Write-temp-then-rename so concurrent ingests never expose partial files.
    fd, tmp = tempfile.mkstemp(prefix=".ingest-", dir=dest.parent)
    os.close(fd)
    try:
        shutil.copyfile(source, tmp)
        os.replace(tmp, dest)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def iter_card_images(source: Path) -> list[Path]:
    """Image files on a card, sorted by name. Broken entries are kept so the
    per-file error handling can report them."""
    out = []
    for entry in sorted(source.iterdir()):
        if entry.name.startswith("."):
            continue
        if entry.suffix.lower() in IMAGE_SUFFIXES:
            out.append(entry)
    return out


def ingest_card(source: Path, dest: Path, provider: MetadataProvider) -> IngestReport:
    """Copy every image on one card into the archive, idempotently.

    Pre-existing byte-identical destination files count as duplicates; a name
    collision with different content is an error. Per-file failures never
    abort the card.
    """
    report = IngestReport()
    started = time.perf_counter()
    made_dirs: set[Path] = set()
    for image in iter_card_images(source):
        try:
            meta = provider.lookup(image.name)
        except MetadataError as exc:
            report.errors.append((str(image), str(exc)))
            continue
        if meta.out_of_schedule:
            report.out_of_schedule += 1
        target_dir = archive_dir(dest, meta)
        target = target_dir / canonical_name(meta)
        try:
            if target_dir not in made_dirs:
                target_dir.mkdir(parents=True, exist_ok=True)
                made_dirs.add(target_dir)
            if target.exists():
                if filecmp.cmp(image, target, shallow=False):
                    report.skipped_duplicates += 1
                else:
                    report.errors.append(
                        (str(image), f"exists with different content: {target}")
                    )
                continue
            _atomic_copy(image, target)
            report.copied += 1
        except OSError as exc:
            report.errors.append((str(image), str(exc)))
    report.elapsed = time.perf_counter() - started
    return report


@dataclass
class CardSpec:
    """One SD card to ingest: the image directory and its manifest file."""

    source: Path
    manifest: Path

    @classmethod
    def with_default_manifest(cls, source: Path) -> "CardSpec":
        return cls(source, source / "manifest.csv")


def ingest_cards(
    cards: Iterable[CardSpec], dest: Path, workers: int = 4
) -> dict[str, IngestReport]:
    """Ingest several cards concurrently. The archive tree is the only shared
    state; atomic copies make card-level parallelism safe."""
    cards = list(cards)

    def _one(card: CardSpec) -> tuple[str, IngestReport]:
        provider = ManifestProvider(card.manifest)
        return str(card.source), ingest_card(card.source, dest, provider)

    if len(cards) <= 1 or workers <= 1:
        return dict(_one(c) for c in cards)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return dict(pool.map(_one, cards))

"""Append-only annotation persistence plus the event schema it enforces.

Every write appends one CSV row; nothing is ever rewritten, so the current
state is a pure fold over the log (highest revision per annotation id wins,
tombstones delete). Logs are one file per recording under
``<root>/annotations/``, which also serializes writers per recording.
"""

from __future__ import annotations

import csv
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional

# Draft segments import under this built-in event so the annotation UI edits
# one uniform record type even when the schema file is empty.
AUTO_EVENT = "animal-present"

ANNOTATION_HEADER = [
    "annotation_id",
    "recording_id",
    "start_frame",
    "end_frame",
    "event",
    "animal_id",
    "author",
    "modified_utc",
    "revision",
    "tombstone",
]


class SchemaError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class EventSpec:
    name: str
    id_required: bool = False


@dataclass
class EventSchema:
    events: list[EventSpec]

    def __post_init__(self) -> None:
        seen = set()
        for event in self.events:
            if event.name in seen:
                raise SchemaError(f"duplicate event {event.name!r}")
            seen.add(event.name)

    def get(self, name: str) -> Optional[EventSpec]:
        for event in self.events:
            if event.name == name:
                return event
        return None


def parse_event_schema(text: str) -> EventSchema:
    """Parse the annotation event configuration.

    One event per line: ``event <name> [id-required]``. Blank lines and
    ``#`` comments are ignored.
    """
    events: list[EventSpec] = []
    names = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] != "event" or len(tokens) not in (2, 3):
            raise SchemaError(f"line {lineno}: expected 'event <name> [id-required]'")
        name = tokens[1]
        if "," in name:
            raise SchemaError(f"line {lineno}: event name may not contain commas")
        if len(tokens) == 3 and tokens[2] != "id-required":
            raise SchemaError(f"line {lineno}: unknown flag {tokens[2]!r}")
        if name in names:
            raise SchemaError(f"line {lineno}: duplicate event {name!r}")
        names.add(name)
        events.append(EventSpec(name, len(tokens) == 3))
    return EventSchema(events)


def load_event_schema(path: Path) -> EventSchema:
    return parse_event_schema(Path(path).read_text())


@dataclass(frozen=True)
class Annotation:
    annotation_id: str
    recording_id: str
    start_frame: int
    end_frame: int
    event: str = ""  # "" is a plain segment with no named event
    animal_id: Optional[str] = None
    author: str = ""
    modified_utc: str = ""
    revision: int = 0
    tombstone: bool = False


_SAFE_ID = re.compile(r"^[A-Za-z0-9._:-]+$")


def validate_annotation(ann: Annotation, schema: EventSchema) -> None:
    if not ann.annotation_id or not _SAFE_ID.match(ann.annotation_id):
        raise ValidationError(f"bad annotation id {ann.annotation_id!r}")
    if not ann.recording_id:
        raise ValidationError("missing recording id")
    if ann.start_frame < 0 or ann.start_frame > ann.end_frame:
        raise ValidationError(
            f"bad frame interval [{ann.start_frame}, {ann.end_frame}]"
        )
    if ann.event and ann.event != AUTO_EVENT:
        spec = schema.get(ann.event)
        if spec is None:
            raise ValidationError(f"unknown event {ann.event!r}")
        if spec.id_required and not ann.animal_id:
            raise ValidationError(f"event {ann.event!r} requires an animal id")


def _now_utc() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f+00:00")


class AnnotationStore:
    """Folded view over the append-only annotation logs."""

    def __init__(self, root: Path, schema: EventSchema | None = None):
        self.root = Path(root)
        self.schema = schema if schema is not None else EventSchema([])
        self._dir = self.root / "annotations"
        self._dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._current: dict[str, Annotation] = {}
        self._recording_of: dict[str, str] = {}
        for log_file in sorted(self._dir.glob("*.csv")):
            for ann in _read_log(log_file):
                self._apply(ann)

    def _apply(self, ann: Annotation) -> None:
        prior = self._current.get(ann.annotation_id)
        if prior is None or ann.revision >= prior.revision:
            self._current[ann.annotation_id] = ann
            self._recording_of[ann.annotation_id] = ann.recording_id

    def _log_path(self, recording_id: str) -> Path:
        safe = recording_id.replace("/", "_").replace("\\", "_")
        return self._dir / f"{safe}.csv"

    def _append(self, ann: Annotation) -> None:
        path = self._log_path(ann.recording_id)
        new_file = not path.exists()
        with open(path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(ANNOTATION_HEADER)
            writer.writerow(
                [
                    ann.annotation_id,
                    ann.recording_id,
                    ann.start_frame,
                    ann.end_frame,
                    ann.event,
                    ann.animal_id or "",
                    ann.author,
                    ann.modified_utc,
                    ann.revision,
                    int(ann.tombstone),
                ]
            )
            fh.flush()

    def upsert(self, ann: Annotation) -> Annotation:
        """Validate and append; revision and modified time are assigned here."""
        with self._lock:
            validate_annotation(ann, self.schema)
            prior = self._current.get(ann.annotation_id)
            if prior is not None and prior.recording_id != ann.recording_id:
                raise ValidationError(
                    f"annotation {ann.annotation_id} belongs to {prior.recording_id}"
                )
            stored = replace(
                ann,
                revision=(prior.revision + 1) if prior else 1,
                modified_utc=_now_utc(),
                tombstone=False,
            )
            self._append(stored)
            self._apply(stored)
            return stored

    def delete(self, annotation_id: str) -> Annotation:
        """Append a tombstone for an existing annotation."""
        with self._lock:
            prior = self._current.get(annotation_id)
            if prior is None or prior.tombstone:
                raise KeyError(annotation_id)
            stone = replace(
                prior,
                revision=prior.revision + 1,
                modified_utc=_now_utc(),
                tombstone=True,
            )
            self._append(stone)
            self._apply(stone)
            return stone

    def get(self, annotation_id: str) -> Optional[Annotation]:
        ann = self._current.get(annotation_id)
        return None if ann is None or ann.tombstone else ann

    def current(self, recording_id: str | None = None) -> list[Annotation]:
        """Live annotations, sorted by (recording, start frame, id)."""
        rows = [
            a
            for a in self._current.values()
            if not a.tombstone
            and (recording_id is None or a.recording_id == recording_id)
        ]
        rows.sort(key=lambda a: (a.recording_id, a.start_frame, a.annotation_id))
        return rows

    def recordings(self) -> list[str]:
        return sorted({a.recording_id for a in self._current.values()})


def _read_log(path: Path) -> Iterable[Annotation]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ANNOTATION_HEADER:
            raise ValidationError(f"{path}: bad annotation log header")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ANNOTATION_HEADER):
                raise ValidationError(f"{path}:{lineno}: wrong field count")
            try:
                yield Annotation(
                    annotation_id=row[0],
                    recording_id=row[1],
                    start_frame=int(row[2]),
                    end_frame=int(row[3]),
                    event=row[4],
                    animal_id=row[5] or None,
                    author=row[6],
                    modified_utc=row[7],
                    revision=int(row[8]),
                    tombstone=row[9] == "1",
                )
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None


SUGGESTION_HEADER = [
    "recording_id",
    "start_frame",
    "end_frame",
    "sampled_frame",
    "rank",
    "individual_id",
    "distance",
]


@dataclass(frozen=True)
class SuggestionRow:
    recording_id: str
    start_frame: int
    end_frame: int
    sampled_frame: int
    rank: int
    individual_id: str
    distance: float


class SuggestionCache:
    """Precomputed re-identification rankings, keyed by sampled frame."""

    def __init__(self, root: Path):
        self._dir = Path(root) / "suggestions"

    def path_for(self, recording_id: str) -> Path:
        return self._dir / f"{recording_id}.csv"

    def write(self, recording_id: str, rows: Iterable[SuggestionRow]) -> None:
        path = self.path_for(recording_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SUGGESTION_HEADER)
            for r in rows:
                writer.writerow(
                    [
                        r.recording_id,
                        r.start_frame,
                        r.end_frame,
                        r.sampled_frame,
                        r.rank,
                        r.individual_id,
                        repr(float(r.distance)),
                    ]
                )

    def load(self, recording_id: str) -> Optional[list[SuggestionRow]]:
        path = self.path_for(recording_id)
        if not path.exists():
            return None
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for row in reader:
                if not row:
                    continue
                rows.append(
                    SuggestionRow(
                        row[0], int(row[1]), int(row[2]), int(row[3]),
                        int(row[4]), row[5], float(row[6]),
                    )
                )
        return rows

    def lookup(self, recording_id: str, frame: int) -> tuple[bool, list[tuple[str, float]]]:
        """(re-id available, ranked suggestions for the nearest sampled frame).

        Empty list with available=True means the frame is outside every
        segment; available=False means the recording was never processed.
        """
        rows = self.load(recording_id)
        if rows is None:
            return False, []
        covering = [r for r in rows if r.start_frame <= frame <= r.end_frame]
        if not covering:
            return True, []
        nearest = min(covering, key=lambda r: (abs(r.sampled_frame - frame), r.sampled_frame))
        ranked = sorted(
            (r for r in covering if r.sampled_frame == nearest.sampled_frame
             and r.start_frame == nearest.start_frame and r.end_frame == nearest.end_frame),
            key=lambda r: r.rank,
        )
        return True, [(r.individual_id, r.distance) for r in ranked]


class Stage(Enum):
    INGESTED = "Ingested"
    SEGMENTED = "Segmented"
    ENCODED = "Encoded"
    VERIFIED = "Verified"


STAGE_ORDER = {s: i for i, s in enumerate(Stage)}

STATUS_HEADER = ["burrow_id", "date", "stage", "items", "completed_utc"]


@dataclass(frozen=True)
class StatusRecord:
    burrow_id: str
    date: str  # YYYYMMDD
    stage: Stage
    items: int
    completed_utc: str


class StatusLog:
    """Append-only log of pipeline progress per burrow-day."""

    def __init__(self, root: Path):
        self.path = Path(root) / "status.csv"

    def append(self, record: StatusRecord) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        new_file = not self.path.exists()
        with open(self.path, "a", newline="") as fh:
            writer = csv.writer(fh)
            if new_file:
                writer.writerow(STATUS_HEADER)
            writer.writerow(
                [
                    record.burrow_id,
                    record.date,
                    record.stage.value,
                    record.items,
                    record.completed_utc,
                ]
            )

    def mark(self, burrow_id: str, date: str, stage: Stage, items: int) -> None:
        self.append(StatusRecord(burrow_id, date, stage, items, _now_utc()))

    def read_all(self) -> list[StatusRecord]:
        if not self.path.exists():
            return []
        records = []
        with open(self.path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader, None)
            for row in reader:
                if not row:
                    continue
                records.append(
                    StatusRecord(row[0], row[1], Stage(row[2]), int(row[3]), row[4])
                )
        return records

"""CSV reports over annotation data and pipeline processing status.

Column orders are fixed so downstream spreadsheets and R scripts stay stable.
"""

from __future__ import annotations

import csv
import io
from datetime import datetime, timezone
from typing import Iterable, Optional

from .ingest import split_recording_id
from .store import STAGE_ORDER, AnnotationStore, Stage, StatusRecord

BACKLOG_DEADLINE_HOURS = 48.0

ANNOTATION_REPORT_HEADER = [
    "annotation_id",
    "recording_id",
    "start_frame",
    "end_frame",
    "event",
    "animal_id",
    "author",
    "modified_utc",
]

STATUS_REPORT_HEADER = [
    "burrow_id",
    "date",
    "stage",
    "items",
    "completed_utc",
    "backlog",
]


def _recording_parts(recording_id: str) -> tuple[Optional[str], Optional[str]]:
    try:
        burrow, _view, date = split_recording_id(recording_id)
        return burrow, date
    except ValueError:
        return None, None


def annotation_report(
    store: AnnotationStore,
    burrow: str | None = None,
    date: str | None = None,
    event: str | None = None,
    animal: str | None = None,
) -> str:
    """Current (highest-revision, non-deleted) annotations matching all filters."""
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(ANNOTATION_REPORT_HEADER)
    for ann in store.current():
        ann_burrow, ann_date = _recording_parts(ann.recording_id)
        if burrow is not None and ann_burrow != burrow:
            continue
        if date is not None and ann_date != date:
            continue
        if event is not None and ann.event != event:
            continue
        if animal is not None and ann.animal_id != animal:
            continue
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
            ]
        )
    return buf.getvalue()


def _parse_utc(stamp: str) -> Optional[datetime]:
    try:
        parsed = datetime.fromisoformat(stamp)
    except ValueError:
        return None
    if parsed.tzinfo is None:
        parsed = parsed.replace(tzinfo=timezone.utc)
    return parsed


def status_report(records: Iterable[StatusRecord], now: datetime) -> str:
    """Latest pipeline stage per burrow-day, with a backlog flag for days that
    were ingested more than 48 hours ago and still are not encoded."""
    if now.tzinfo is None:
        now = now.replace(tzinfo=timezone.utc)
    by_day: dict[tuple[str, str], list[StatusRecord]] = {}
    for record in records:
        by_day.setdefault((record.burrow_id, record.date), []).append(record)

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(STATUS_REPORT_HEADER)
    for (burrow, date), day_records in sorted(by_day.items()):
        latest = max(day_records, key=lambda r: STAGE_ORDER[r.stage])
        backlog = False
        if STAGE_ORDER[latest.stage] < STAGE_ORDER[Stage.ENCODED]:
            ingest_times = [
                t
                for r in day_records
                if r.stage == Stage.INGESTED and (t := _parse_utc(r.completed_utc))
            ]
            anchor = min(
                ingest_times
                or [t for r in day_records if (t := _parse_utc(r.completed_utc))]
                or [now],
            )
            age_hours = (now - anchor).total_seconds() / 3600.0
            backlog = age_hours > BACKLOG_DEADLINE_HOURS
        writer.writerow(
            [
                burrow,
                date,
                latest.stage.value,
                latest.items,
                latest.completed_utc,
                int(backlog),
            ]
        )
    return buf.getvalue()

"""Draft segmentation: run a detector over a recording and group the hits.

Grouping is a pure function over per-frame detection lists, so raw detections
are persisted untouched and grouping can be re-run with different parameters.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO

from .providers import DetectionProvider, FrameScanError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.90
# Two frames (10 s of wall time) of gap tolerance: a single-frame detector
# dropout should not split an event in two.
DEFAULT_GAP = 2
DEFAULT_MIN_LEN = 1


class SegmentCsvError(ValueError):
    """Malformed segment CSV row; message names the line."""


@dataclass(frozen=True)
class Detection:
    frame_index: int
    bbox: tuple[float, float, float, float]  # x, y, w, h in source pixels
    confidence: float
    label: str = "animal"

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise ValueError(f"non-positive box {self.bbox}")


class Source(Enum):
    AUTO = "Auto"
    HUMAN = "Human"


@dataclass(frozen=True, order=True)
class Segment:
    """Inclusive frame interval of one recording."""

    recording_id: str
    start_frame: int
    end_frame: int
    source: Source = Source.AUTO
    animal_ids: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.start_frame > self.end_frame:
            raise ValueError(
                f"start {self.start_frame} after end {self.end_frame}"
            )
        if self.start_frame < 0:
            raise ValueError(f"negative start frame {self.start_frame}")

    def overlaps(self, other: "Segment") -> bool:
        return self.start_frame <= other.end_frame and other.start_frame <= self.end_frame


@dataclass
class DetectionPass:
    """Per-frame detection lists in frame order, with unscanned frames noted."""

    recording_id: str
    detections: list[Optional[list[Detection]]] = field(default_factory=list)
    unscanned: list[int] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def rate(self) -> float:
        if self.elapsed <= 0:
            return 0.0
        return len(self.detections) / self.elapsed


def run_detection_pass(
    recording_id: str,
    frame_paths: Sequence[Path],
    provider: DetectionProvider,
) -> DetectionPass:
    """Detect on every frame. A per-frame provider failure marks that frame
    unscanned and the pass continues; the frame list stays index-aligned."""
    result = DetectionPass(recording_id)
    started = time.perf_counter()
    for index, path in enumerate(frame_paths):
        try:
            raw = provider.detect(index, path)
            result.detections.append(
                [
                    Detection(index, (x, y, w, h), conf, label)
                    for x, y, w, h, conf, label in raw
                ]
            )
        except FrameScanError as exc:
            log.warning("%s frame %d unscanned: %s", recording_id, index, exc)
            result.detections.append(None)
            result.unscanned.append(index)
    result.elapsed = time.perf_counter() - started
    return result


def group_detections(
    recording_id: str,
    per_frame: Sequence[Optional[Iterable[Detection]]],
    threshold: float = DEFAULT_THRESHOLD,
    gap: int = DEFAULT_GAP,
    min_len: int = DEFAULT_MIN_LEN,
) -> list[Segment]:
    """Group detection-positive frames into draft segments.

    A frame is positive iff it has a detection at or above `threshold`.
    Runs of positives merge across internal negative gaps of at most `gap`
    frames; groups with fewer than `min_len` positive frames are dropped.
    Unscanned frames (None) count as negative.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    if gap < 0:
        raise ValueError("gap must be >= 0")
    if min_len < 1:
        raise ValueError("min_len must be >= 1")

    segments: list[Segment] = []
    run_start = run_end = -1
    run_positives = 0

    def close_run() -> None:
        if run_positives >= min_len:
            segments.append(Segment(recording_id, run_start, run_end, Source.AUTO))

    for index, detections in enumerate(per_frame):
        positive = detections is not None and any(
            d.confidence >= threshold for d in detections
        )
        if not positive:
            continue
        if run_positives and index - run_end - 1 > gap:
            close_run()
            run_positives = 0
        if not run_positives:
            run_start = index
        run_end = index
        run_positives += 1
    if run_positives:
        close_run()
    return segments


SEGMENT_HEADER = ["recording_id", "start_frame", "end_frame", "source", "animal_ids"]


def write_segments_csv(dest: Path | TextIO, segments: Iterable[Segment]) -> None:
    """Write sorted segments; animal ids are ';'-joined tokens."""
    rows = sorted(segments)
    close = False
    if isinstance(dest, (str, Path)):
        Path(dest).parent.mkdir(parents=True, exist_ok=True)
        fh: TextIO = open(dest, "w", newline="")
        close = True
    else:
        fh = dest
    try:
        writer = csv.writer(fh)
        writer.writerow(SEGMENT_HEADER)
        for seg in rows:
            writer.writerow(
                [
                    seg.recording_id,
                    seg.start_frame,
                    seg.end_frame,
                    seg.source.value,
                    ";".join(sorted(seg.animal_ids)),
                ]
            )
    finally:
        if close:
            fh.close()


def read_segments_csv(src: Path | TextIO) -> list[Segment]:
    """Read and normalize a segment CSV: rows come back sorted."""
    close = False
    if isinstance(src, (str, Path)):
        fh: TextIO = open(src, newline="")
        close = True
    else:
        fh = src
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != SEGMENT_HEADER:
            raise SegmentCsvError(f"bad segment header {header!r}")
        segments = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SEGMENT_HEADER):
                raise SegmentCsvError(f"wrong field count at line {lineno}")
            rid, start_s, end_s, source_s, ids_s = row
            try:
                start, end = int(start_s), int(end_s)
            except ValueError:
                raise SegmentCsvError(f"non-integer frame at line {lineno}") from None
            try:
                source = Source(source_s)
            except ValueError:
                raise SegmentCsvError(f"unknown source {source_s!r} at line {lineno}") from None
            ids = frozenset(t for t in ids_s.split(";") if t)
            try:
                segments.append(Segment(rid, start, end, source, ids))
            except ValueError as exc:
                raise SegmentCsvError(f"{exc} at line {lineno}") from None
        return sorted(segments)
    finally:
        if close:
            fh.close()


def segments_to_text(segments: Iterable[Segment]) -> str:
    buf = io.StringIO()
    write_segments_csv(buf, segments)
    return buf.getvalue()

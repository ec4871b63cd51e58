"""Segment-matching evaluation: overlap-based confusion counts, precision,
recall, and top-k re-identification accuracy.

A predicted segment is a true positive when it shares at least one frame with
any ground-truth segment; a ground-truth segment with no overlapping
prediction is a false negative. The counts are asymmetric by definition:
tp + fp equals the number of predictions, fn counts ground-truth segments.
Zero-denominator metrics come back as None, never as a made-up number.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .reid import Prediction
from .segmenter import Segment

Interval = tuple[int, int]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")


def _interval(seg: Segment | Interval) -> Interval:
    if isinstance(seg, Segment):
        return seg.start_frame, seg.end_frame
    start, end = seg
    if start > end:
        raise ValueError(f"interval start {start} after end {end}")
    return int(start), int(end)


def match_segments(
    predicted: Sequence[Segment | Interval], truth: Sequence[Segment | Interval]
) -> ConfusionCounts:
    """Count overlap matches between sorted predicted and truth segments."""
    pred = [_interval(s) for s in predicted]
    true = [_interval(s) for s in truth]

    def overlapped(queries: list[Interval], against: list[Interval]) -> int:
        # Sweep: `j` skips intervals that end before every remaining query
        # starts; the inner scan stops once starts pass the query's end.
        hits = 0
        j = 0
        for start, end in queries:
            while j < len(against) and against[j][1] < start:
                j += 1
            for other_start, other_end in against[j:]:
                if other_start > end:
                    break
                if other_end >= start:
                    hits += 1
                    break
        return hits

    tp = overlapped(pred, true)
    matched_truth = overlapped(true, pred)
    return ConfusionCounts(tp=tp, fp=len(pred) - tp, fn=len(true) - matched_truth)


def precision_recall(c: ConfusionCounts) -> tuple[Optional[float], Optional[float]]:
    precision = c.tp / (c.tp + c.fp) if c.tp + c.fp else None
    recall = c.tp / (c.tp + c.fn) if c.tp + c.fn else None
    return precision, recall


def f1_score(precision: Optional[float], recall: Optional[float]) -> Optional[float]:
    if precision is None or recall is None or precision + recall == 0:
        return None
    return 2 * precision * recall / (precision + recall)


def topk_accuracy(
    predictions: Sequence[tuple[str, Prediction]], k: int
) -> Optional[float]:
    """Fraction of queries whose true id is in the first min(k, len) entries."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not predictions:
        return None
    hits = 0
    for true_id, ranked in predictions:
        top = ranked[: min(k, len(ranked))]
        if any(individual == true_id for individual, _ in top):
            hits += 1
    return hits / len(predictions)

"""Deadline model: will a workload clear the 48-hour backlog window?

Stages are modeled as strictly sequential on one machine, which reproduces
the reference single-desktop timing; per-stage worker counts let the same
model sketch scale-out.
"""

from __future__ import annotations

from dataclasses import dataclass

DEADLINE_HOURS = 48.0


@dataclass(frozen=True)
class WorkloadSpec:
    """One processing batch: a batch of SD cards covering `days_per_batch` days."""

    burrows: int
    days_per_batch: int
    overhead_card_images: int  # images on one overhead card (whole batch)
    front_card_images: int
    segmentation_rate: float  # images/s, detector-bound
    copy_rate: float  # images/s, rename-and-copy only
    compression_minutes_per_burrow_day: float

    def __post_init__(self) -> None:
        # Counts may be zero (an empty batch is a valid question); the rates
        # divide, so they must stay strictly positive.
        for name in ("burrows", "days_per_batch", "overhead_card_images", "front_card_images"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("segmentation_rate", "copy_rate", "compression_minutes_per_burrow_day"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class StageWorkers:
    segmentation: int = 1
    copy: int = 1
    compression: int = 1


@dataclass(frozen=True)
class ScheduleEstimate:
    segmentation_hours: float
    copy_hours: float
    compression_hours: float
    deadline_hours: float = DEADLINE_HOURS

    @property
    def makespan_hours(self) -> float:
        return self.segmentation_hours + self.copy_hours + self.compression_hours

    @property
    def meets_deadline(self) -> bool:
        return self.makespan_hours <= self.deadline_hours


def estimate_schedule(
    workload: WorkloadSpec, workers: StageWorkers = StageWorkers()
) -> ScheduleEstimate:
    """Projected makespan in hours for one batch, stage by stage."""
    seg = workload.burrows * workload.overhead_card_images / workload.segmentation_rate
    copy = workload.burrows * workload.front_card_images / workload.copy_rate
    compress = (
        workload.burrows
        * workload.days_per_batch
        * workload.compression_minutes_per_burrow_day
        * 60.0
    )
    return ScheduleEstimate(
        segmentation_hours=seg / workers.segmentation / 3600.0,
        copy_hours=copy / workers.copy / 3600.0,
        compression_hours=compress / workers.compression / 3600.0,
    )


# The reference deployment: 12 burrows, two 14-hour days per card batch,
# 20,000 images per card, detector at 10 images/s, plain copy at 30 images/s,
# 34 minutes of video compression per burrow-day.
REFERENCE_WORKLOAD = WorkloadSpec(
    burrows=12,
    days_per_batch=2,
    overhead_card_images=20_000,
    front_card_images=20_000,
    segmentation_rate=10.0,
    copy_rate=30.0,
    compression_minutes_per_burrow_day=34.0,
)

"""
Deterministic synthetic measurement fixtures.

A scenario declares, per (region, dataset, metric), how many samples to draw,
the value range, a threshold and whether the aggregate should meet it. The
generator places just enough samples on the required side of the threshold
for the tail-percentile rule, draws the rest from the whole range, shuffles,
and re-aggregates to confirm the intended outcome before returning.
"""

from datetime import datetime, timedelta, timezone
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from backend.iqb.analytics.aggregate import aggregate_region, nearest_rank
from backend.iqb.analytics.scoring import binary_requirement_score
from backend.iqb.errors import FixtureError
from backend.iqb.model import AggregationMode, MeasurementRecord, MetricKind
from backend.iqb.model.types import DatasetId, key_path


class Outcome(str, Enum):
    passes = "pass"
    fails = "fail"


class FixtureEntry(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    region_id: str = Field(min_length=1)
    dataset: DatasetId
    metric: MetricKind
    sample_count: int
    threshold: float = Field(ge=0)
    outcome: Outcome
    min_value: float = Field(ge=0)
    max_value: float = Field(ge=0)

    @model_validator(mode="after")
    def _check_range(self) -> "FixtureEntry":
        if self.min_value > self.max_value:
            raise ValueError("min_value must not exceed max_value")
        if self.metric is MetricKind.packet_loss and self.max_value > 1:
            raise ValueError("packet loss values are fractions in [0, 1]")
        return self


class FixtureScenario(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    entries: list[FixtureEntry]
    percentile: float = Field(default=95.0, gt=0, lt=100)
    mode: AggregationMode = AggregationMode.tail
    start: datetime = datetime(2025, 1, 1, tzinfo=timezone.utc)
    # Spacing between consecutive sample timestamps
    interval_seconds: int = Field(default=60, ge=1)


def _sides(entry: FixtureEntry) -> tuple[tuple[float, float], tuple[float, float]]:
    """(good side, bad side) intervals of the value range around the threshold."""
    lo, hi, t = entry.min_value, entry.max_value, entry.threshold
    if entry.metric.higher_is_better:
        return (max(lo, t), hi), (lo, min(hi, np.nextafter(t, -np.inf)))
    return (lo, min(hi, t)), (max(lo, np.nextafter(t, np.inf)), hi)


def _draw(entry: FixtureEntry, scenario: FixtureScenario, rng: np.random.Generator) -> np.ndarray:
    n = entry.sample_count
    key = key_path(entry.region_id, entry.dataset, entry.metric)
    if n < 1:
        raise FixtureError(f"scenario {key} needs at least one sample")

    # Samples that must land on the intended side of the threshold
    rank = nearest_rank(scenario.percentile, n)
    passing = entry.outcome is Outcome.passes
    if scenario.mode is AggregationMode.literal and entry.metric.higher_is_better:
        passing = not passing
    needed = rank if passing else n - rank + 1

    good, bad = _sides(entry)
    low, high = good if entry.outcome is Outcome.passes else bad
    if low > high:
        raise FixtureError(
            f"scenario {key} impossible: no value in [{entry.min_value}, {entry.max_value}] "
            f"can {entry.outcome.value} threshold {entry.threshold}"
        )

    forced = rng.uniform(low, high, size=needed) if high > low else np.full(needed, low)
    rest = rng.uniform(entry.min_value, entry.max_value, size=n - needed) \
        if entry.max_value > entry.min_value else np.full(n - needed, entry.min_value)
    values = np.concatenate([forced, rest])
    rng.shuffle(values)
    return values


def generate_fixture(seed: int, scenario: FixtureScenario) -> list[MeasurementRecord]:
    """
    Generate measurement records for a scenario; deterministic for a given seed.

    Raises FixtureError when an entry cannot be realized.
    """
    rng = np.random.default_rng(seed)
    step = timedelta(seconds=scenario.interval_seconds)
    records: list[MeasurementRecord] = []

    for entry in scenario.entries:
        values = _draw(entry, scenario, rng)
        batch = [
            MeasurementRecord(
                region_id=entry.region_id,
                dataset=entry.dataset,
                metric=entry.metric,
                value=float(v),
                timestamp=scenario.start + i * step,
            )
            for i, v in enumerate(values)
        ]
        stat = aggregate_region(
            batch, entry.region_id, entry.dataset, entry.metric,
            p=scenario.percentile, mode=scenario.mode, min_samples=1,
        )
        realized = binary_requirement_score(stat, entry.threshold, entry.metric.direction)
        if realized != int(entry.outcome is Outcome.passes):
            raise FixtureError(
                f"scenario {key_path(entry.region_id, entry.dataset, entry.metric)}: "
                f"aggregate {stat.value} does not {entry.outcome.value} threshold {entry.threshold}"
            )
        records.extend(batch)

    return records

"""
Aggregation - measurement records to one AggregateStat per (region, dataset, metric).

Each key is reduced to a single tail percentile (95th by default) using the
nearest-rank method, so every computed value is an observed measurement.

Orientation:
- lower_is_better metrics (latency, packet loss): the p-th percentile
- higher_is_better metrics (throughput): the (100 - p)-th percentile, selected
  as the ceil(p/100 * n)-th largest sample, so that "at least p% of samples
  meet the threshold" holds for both directions
- literal mode: the p-th percentile for every metric

Pre-aggregated datasets pass through unchanged and win over computed stats.

Usage:
    python -m backend.main aggregate --config CONFIG INPUT...
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from backend.iqb.errors import AggregationError, InsufficientDataError
from backend.iqb.model import (
    AggregateKey,
    AggregateStat,
    AggregationMode,
    AggregationSettings,
    MeasurementRecord,
    MetricKind,
    Statistic,
)
from backend.iqb.model.types import key_path, warning

logger = logging.getLogger(__name__)

DEFAULT_PERCENTILE = 95.0
DEFAULT_MIN_SAMPLES = 30


# =============================================================================
# PERCENTILES
# =============================================================================

def nearest_rank(p: float, n: int) -> int:
    """1-based rank ceil(p/100 * n), computed in decimal to avoid float drift."""
    return max(1, math.ceil(Decimal(str(p)) * n / 100))


def nearest_rank_percentile(values: Sequence[float], p: float) -> float:
    """
    The ceil(p/100 * n)-th smallest element of `values`.

    Raises InsufficientDataError on empty input and ValueError naming the
    index of the first non-finite value.
    """
    if not 0 < p <= 100:
        raise ValueError(f"percentile must be in (0, 100]: {p}")
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InsufficientDataError("no samples")
    bad = np.flatnonzero(~np.isfinite(arr))
    if bad.size:
        raise ValueError(f"non-finite value at index {int(bad[0])}")
    k = nearest_rank(p, arr.size) - 1
    return float(np.partition(arr, k)[k])


def tail_percentile_for(metric: MetricKind, p: float) -> float:
    """Percentile to compute so that the aggregate describes the worst (100 - p)% tail."""
    if metric.higher_is_better:
        return float(Decimal(100) - Decimal(str(p)))
    return p


def tail_value(values: Sequence[float], metric: MetricKind, p: float, mode: AggregationMode) -> float:
    """Aggregate `values` for `metric` under the given orientation mode."""
    if mode is AggregationMode.tail and metric.higher_is_better:
        return -nearest_rank_percentile(np.negative(np.asarray(values, dtype=float)), p)
    return nearest_rank_percentile(values, p)


# =============================================================================
# PER-KEY AGGREGATION
# =============================================================================

def _aggregate_values(
    key: AggregateKey,
    values: Sequence[float],
    p: float,
    mode: AggregationMode,
    min_samples: int,
) -> AggregateStat:
    region, dataset, metric = key
    if len(values) == 0:
        raise InsufficientDataError(f"insufficient data for {key_path(region, dataset, metric)}")

    if mode is AggregationMode.tail:
        statistic, percentile = Statistic.p95_tail, tail_percentile_for(metric, p)
    else:
        statistic, percentile = Statistic.literal_p95, p

    stat = AggregateStat(
        region_id=region,
        dataset=dataset,
        metric=metric,
        statistic=statistic,
        value=tail_value(values, metric, p, mode),
        sample_count=len(values),
        percentile=percentile,
    )
    if len(values) < min_samples:
        stat = stat.with_warnings(warning(
            "low_sample_count",
            key_path(region, dataset, metric),
            f"only {len(values)} samples (minimum {min_samples})",
        ))
    return stat


def aggregate_region(
    records: Iterable[MeasurementRecord],
    region: str,
    dataset: str,
    metric: MetricKind,
    p: float = DEFAULT_PERCENTILE,
    mode: AggregationMode = AggregationMode.tail,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> AggregateStat:
    """
    Aggregate the records of one (region, dataset, metric).

    Raises InsufficientDataError when no record matches.
    """
    if not 0 < p < 100:
        raise ValueError(f"percentile must be in (0, 100): {p}")
    values = [
        r.value for r in records
        if r.region_id == region and r.dataset == dataset and r.metric is metric
    ]
    return _aggregate_values((region, dataset, metric), values, p, mode, min_samples)


# =============================================================================
# AGGREGATE MATRIX
# =============================================================================

def _records_frame(records: Sequence[MeasurementRecord]) -> pd.DataFrame:
    return pd.DataFrame({
        "region_id": [r.region_id for r in records],
        "dataset": [r.dataset for r in records],
        "metric": [r.metric.value for r in records],
        "value": np.fromiter((r.value for r in records), dtype=float, count=len(records)),
    })


def build_aggregate_matrix(
    records: Sequence[MeasurementRecord],
    provided: Sequence[AggregateStat] = (),
    settings: AggregationSettings | None = None,
    workers: int = 1,
) -> dict[AggregateKey, AggregateStat]:
    """
    Assemble the datasets tier: computed stats for per-test records plus
    provided stats for pre-aggregated sources.

    Keys are returned in (region, dataset, metric) lexicographic order.
    Raises AggregationError on duplicate provided stats.
    """
    settings = settings or AggregationSettings()

    groups: list[tuple[AggregateKey, np.ndarray]] = []
    if records:
        frame = _records_frame(records)
        for (region, dataset, metric), group in frame.groupby(["region_id", "dataset", "metric"], sort=True):
            groups.append(((region, dataset, MetricKind(metric)), group["value"].to_numpy()))

    def run(item: tuple[AggregateKey, np.ndarray]) -> AggregateStat:
        key, values = item
        return _aggregate_values(key, values, settings.percentile, settings.mode, settings.min_samples)

    if workers > 1 and len(groups) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            computed = list(pool.map(run, groups))
    else:
        computed = [run(item) for item in groups]

    matrix: dict[AggregateKey, AggregateStat] = {stat.key: stat for stat in computed}

    seen: set[AggregateKey] = set()
    for stat in provided:
        if stat.statistic is not Statistic.provided:
            raise AggregationError(f"expected a provided statistic for {key_path(*stat.key)}")
        if stat.key in seen:
            raise AggregationError(f"duplicate provided statistic for {key_path(*stat.key)}")
        seen.add(stat.key)
        if stat.key in matrix:
            logger.warning("Provided statistic overrides computed value for %s", key_path(*stat.key))
            stat = stat.with_warnings(warning(
                "provided_overrides_computed",
                key_path(*stat.key),
                f"provided statistic replaces value computed from {matrix[stat.key].sample_count} samples",
            ))
        matrix[stat.key] = stat

    logger.info("Aggregated %d computed and %d provided keys", len(computed), len(seen))
    return dict(sorted(matrix.items(), key=lambda item: (item[0][0], item[0][1], item[0][2].value)))

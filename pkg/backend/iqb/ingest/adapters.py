"""
Dataset Export Adapters - CSV exports to canonical records

Maps heterogeneous dataset exports onto the canonical forms through an
AdapterSpec (column map, metric aliases, unit conversions). Malformed rows
are rejected with a row number and reason; they never abort the batch.

Canonical per-test schema:
- region_id, dataset_id, metric, value, unit, timestamp (RFC 3339)

Canonical pre-aggregated schema:
- region_id, dataset_id, metric, statistic, value, unit, sample_count

Reject report schema:
- row_number, reason (row_number counts data rows from 1)
"""

import csv
import logging
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable, Optional, Union

import pandas as pd
import yaml
from pydantic import BaseModel, ConfigDict, Field, NonNegativeInt, TypeAdapter, ValidationError, model_validator

from backend.iqb.errors import ConfigError, IngestError
from backend.iqb.model import (
    AggregateStat,
    Finding,
    Granularity,
    MeasurementRecord,
    MetricKind,
    Statistic,
)
from backend.iqb.model.types import DatasetId, key_path, warning
from backend.iqb.model.units import UnitConversion, to_canonical

logger = logging.getLogger(__name__)

TableSource = Union[str, Path, IO, pd.DataFrame]

ROW_NUMBER = "row_number"

PER_TEST_COLUMNS = ("region_id", "dataset_id", "metric", "value", "unit", "timestamp")
PRE_AGGREGATED_COLUMNS = ("region_id", "dataset_id", "metric", "statistic", "value", "unit", "sample_count")

REQUIRED_FIELDS: dict[Granularity, tuple[str, ...]] = {
    Granularity.per_test: ("region_id", "metric", "value", "timestamp"),
    Granularity.pre_aggregated: ("region_id", "metric", "statistic", "value"),
}
OPTIONAL_FIELDS: dict[Granularity, tuple[str, ...]] = {
    Granularity.per_test: ("dataset", "unit"),
    Granularity.pre_aggregated: ("dataset", "unit", "sample_count"),
}

# Statistic names accepted as the configured "p95", including our own aggregate output
P95_ALIASES = {"p95", "q95", "percentile_95", "95th_percentile", "p95_tail", "literal_p95"}

SAMPLE_COUNT = TypeAdapter(NonNegativeInt)


class RowReject(Finding):
    """A rejected input row."""
    row_number: int


def _reject(row_number: int, reason: str) -> RowReject:
    return RowReject(code="rejected_row", key=f"row.{row_number}", message=reason, row_number=row_number)


# =============================================================================
# ADAPTER SPEC
# =============================================================================

class AdapterSpec(BaseModel):
    """
    How to read one dataset's export.

    column_map maps source column -> canonical field. When `dataset` is set it
    is used for rows that carry no dataset column.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    dataset: Optional[DatasetId] = None
    granularity: Granularity
    column_map: dict[str, str]
    unit_conversions: dict[str, UnitConversion] = Field(default_factory=dict)
    metric_aliases: dict[str, MetricKind] = Field(default_factory=dict)
    # Unit assumed when a row has none
    default_units: dict[MetricKind, str] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_columns(self) -> "AdapterSpec":
        allowed = set(REQUIRED_FIELDS[self.granularity]) | set(OPTIONAL_FIELDS[self.granularity])
        unknown = sorted(set(self.column_map.values()) - allowed)
        if unknown:
            raise ValueError(f"unknown canonical fields for {self.granularity.value}: {unknown}")
        required = set(REQUIRED_FIELDS[self.granularity])
        if self.dataset is None:
            required.add("dataset")
        missing = sorted(required - set(self.column_map.values()))
        if missing:
            raise ValueError(f"column_map does not cover required fields: {missing}")
        return self

    def source_column(self, canonical: str) -> Optional[str]:
        return next((src for src, dst in self.column_map.items() if dst == canonical), None)

    def for_dataset(self, dataset: str) -> "AdapterSpec":
        return self.model_copy(update={"dataset": dataset})


def _canonical_map(columns: Iterable[str]) -> dict[str, str]:
    return {c: ("dataset" if c == "dataset_id" else c) for c in columns}


CANONICAL_PER_TEST = AdapterSpec(
    granularity=Granularity.per_test,
    column_map=_canonical_map(PER_TEST_COLUMNS),
)
CANONICAL_PRE_AGGREGATED = AdapterSpec(
    granularity=Granularity.pre_aggregated,
    column_map=_canonical_map(PRE_AGGREGATED_COLUMNS),
)


def canonical_spec(granularity: Granularity) -> AdapterSpec:
    if granularity is Granularity.per_test:
        return CANONICAL_PER_TEST
    return CANONICAL_PRE_AGGREGATED


def load_adapter_spec(path: Path | str) -> AdapterSpec:
    """Read an adapter spec YAML file. Raises ConfigError."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
        return AdapterSpec.model_validate(raw)
    except OSError as e:
        raise ConfigError(f"cannot read adapter spec {path}: {e}") from e
    except (yaml.YAMLError, ValidationError) as e:
        raise ConfigError(f"invalid adapter spec {path}:\n{e}") from e


# =============================================================================
# TABLE READING
# =============================================================================

def _split_rows(source: Union[str, Path, IO]) -> list[list[str]]:
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return [row for row in csv.reader(fh) if row]
    return [row for row in csv.reader(source) if row]


def read_table(source: TableSource) -> pd.DataFrame:
    """
    Read a CSV export with every cell as a string. Raises IngestError.

    The index holds data-row numbers from 1. Lines whose field count differs
    from the header stay out of the frame and are listed in
    frame.attrs["ragged"] as {row_number: reason}.
    """
    if isinstance(source, pd.DataFrame):
        frame = source.astype(str)
        if source.index.name != ROW_NUMBER:
            frame.index = pd.RangeIndex(1, len(frame) + 1, name=ROW_NUMBER)
        frame.attrs["ragged"] = dict(source.attrs.get("ragged", {}))
        return frame
    try:
        rows = _split_rows(source)
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise IngestError(f"unreadable input {source}: {e}") from e
    if not rows:
        raise IngestError(f"unreadable input {source}: no header row")

    header, body = rows[0], rows[1:]
    kept, numbers, ragged = [], [], {}
    for row_number, fields in enumerate(body, start=1):
        if len(fields) == len(header):
            kept.append(fields)
            numbers.append(row_number)
        else:
            ragged[row_number] = f"expected {len(header)} fields, found {len(fields)}"
    frame = pd.DataFrame(kept, columns=header, index=pd.Index(numbers, name=ROW_NUMBER), dtype=str)
    frame.attrs["ragged"] = ragged
    if ragged:
        logger.warning("%d ragged lines in %s", len(ragged), source)
    return frame


def _ragged_rejects(frame: pd.DataFrame) -> list[RowReject]:
    return [_reject(n, reason) for n, reason in frame.attrs.get("ragged", {}).items()]


def _check_header(frame: pd.DataFrame, spec: AdapterSpec) -> None:
    needed = [spec.source_column(f) for f in REQUIRED_FIELDS[spec.granularity]]
    if spec.dataset is None:
        needed.append(spec.source_column("dataset"))
    missing = [c for c in needed if c not in frame.columns]
    if missing:
        raise IngestError(f"input is missing columns {missing}")


def detect_granularity(frame: pd.DataFrame) -> Granularity:
    """Canonical inputs: a statistic column marks a pre-aggregated export."""
    return Granularity.pre_aggregated if "statistic" in frame.columns else Granularity.per_test


def _row_fields(row: dict, spec: AdapterSpec) -> dict[str, str]:
    fields = {dst: str(row.get(src, "")).strip() for src, dst in spec.column_map.items() if src in row}
    if spec.dataset is not None:
        if fields.get("dataset") and fields["dataset"] != spec.dataset:
            raise ValueError(f"dataset mismatch: {fields['dataset']!r} (expected {spec.dataset!r})")
        fields["dataset"] = spec.dataset
    return fields


def _parse_metric(token: str, spec: AdapterSpec) -> MetricKind:
    if token in spec.metric_aliases:
        return spec.metric_aliases[token]
    try:
        return MetricKind(token)
    except ValueError:
        raise ValueError(f"unknown metric {token!r}") from None


def _parse_value(fields: dict[str, str], metric: MetricKind, spec: AdapterSpec) -> float:
    try:
        value = float(fields["value"])
    except ValueError:
        raise ValueError(f"value is not a number: {fields['value']!r}") from None
    unit = fields.get("unit") or spec.default_units.get(metric)
    return to_canonical(value, unit, metric, spec.unit_conversions)


def _parse_count(text: str) -> int:
    try:
        return SAMPLE_COUNT.validate_python(float(text))
    except (ValueError, ValidationError):
        raise ValueError(f"sample_count is not a non-negative integer: {text!r}") from None


def _reason(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        msg = err["msg"].removeprefix("Value error, ")
        loc = ".".join(str(p) for p in err["loc"])
        parts.append(f"{loc}: {msg}" if loc else msg)
    return "; ".join(parts)


# =============================================================================
# PARSERS
# =============================================================================

def parse_per_test(rows: TableSource, spec: AdapterSpec = CANONICAL_PER_TEST) -> tuple[list[MeasurementRecord], list[RowReject]]:
    """
    Map per-test rows to MeasurementRecords in canonical units.

    Every input row ends up either as a record or as a reject.
    """
    if spec.granularity is not Granularity.per_test:
        raise ValueError("parse_per_test needs a per_test adapter spec")
    frame = read_table(rows)
    _check_header(frame, spec)

    records: list[MeasurementRecord] = []
    rejects = _ragged_rejects(frame)
    for row_number, row in zip(frame.index.tolist(), frame.to_dict("records")):
        try:
            fields = _row_fields(row, spec)
            metric = _parse_metric(fields["metric"], spec)
            record = MeasurementRecord(
                region_id=fields["region_id"],
                dataset=fields["dataset"],
                metric=metric,
                value=_parse_value(fields, metric, spec),
                timestamp=fields["timestamp"],
            )
        except ValidationError as e:
            rejects.append(_reject(row_number, _reason(e)))
            continue
        except (ValueError, KeyError) as e:
            rejects.append(_reject(row_number, str(e)))
            continue
        records.append(record)

    rejects.sort(key=lambda r: r.row_number)
    logger.info("Parsed %d per-test rows: %d records, %d rejects", len(frame), len(records), len(rejects))
    return records, rejects


def parse_pre_aggregated(
    rows: TableSource,
    spec: AdapterSpec = CANONICAL_PRE_AGGREGATED,
    expected_statistic: str = "p95",
) -> tuple[list[AggregateStat], list[RowReject]]:
    """
    Map published statistics to AggregateStats with statistic=provided.

    A declared statistic other than `expected_statistic` is kept but carries a
    statistic_mismatch warning; a missing sample count becomes 0 with a warning.
    Duplicate (region, dataset, metric) rows are rejected after the first.
    """
    if spec.granularity is not Granularity.pre_aggregated:
        raise ValueError("parse_pre_aggregated needs a pre_aggregated adapter spec")
    frame = read_table(rows)
    _check_header(frame, spec)

    expected = {expected_statistic.lower()}
    if expected & P95_ALIASES:
        expected |= P95_ALIASES

    stats: list[AggregateStat] = []
    rejects = _ragged_rejects(frame)
    seen: set[tuple] = set()
    for row_number, row in zip(frame.index.tolist(), frame.to_dict("records")):
        try:
            fields = _row_fields(row, spec)
            metric = _parse_metric(fields["metric"], spec)
            key = (fields["region_id"], fields["dataset"], metric)
            if key in seen:
                rejects.append(_reject(row_number, f"duplicate key {key_path(*key)}"))
                continue

            findings: list[Finding] = []
            count_text = fields.get("sample_count", "")
            if count_text:
                sample_count = _parse_count(count_text)
            else:
                sample_count = 0
                findings.append(warning("missing_sample_count", key_path(*key), "sample count not provided"))

            declared = fields["statistic"]
            if declared.lower() not in expected:
                findings.append(warning(
                    "statistic_mismatch", key_path(*key),
                    f"statistic mismatch: source publishes {declared!r}, expected {expected_statistic!r}",
                ))

            stat = AggregateStat(
                region_id=fields["region_id"],
                dataset=fields["dataset"],
                metric=metric,
                statistic=Statistic.provided,
                value=_parse_value(fields, metric, spec),
                sample_count=sample_count,
                source_statistic=declared,
                warnings=tuple(findings),
            )
        except ValidationError as e:
            rejects.append(_reject(row_number, _reason(e)))
            continue
        except (ValueError, KeyError) as e:
            rejects.append(_reject(row_number, str(e)))
            continue
        seen.add(key)
        stats.append(stat)

    rejects.sort(key=lambda r: r.row_number)
    logger.info("Parsed %d pre-aggregated rows: %d stats, %d rejects", len(frame), len(stats), len(rejects))
    return stats, rejects


# =============================================================================
# WINDOWING AND OUTPUT
# =============================================================================

def filter_window(
    records: Iterable[MeasurementRecord],
    start: Optional[datetime] = None,
    end: Optional[datetime] = None,
) -> tuple[list[MeasurementRecord], int]:
    """Keep records with start <= timestamp < end; return them with the dropped count."""
    kept, dropped = [], 0
    for record in records:
        if (start is not None and record.timestamp < start) or (end is not None and record.timestamp >= end):
            dropped += 1
        else:
            kept.append(record)
    if dropped:
        logger.info("Dropped %d records outside the time window", dropped)
    return kept, dropped


def measurements_frame(records: Iterable[MeasurementRecord]) -> pd.DataFrame:
    rows = [
        {
            "region_id": r.region_id,
            "dataset_id": r.dataset,
            "metric": r.metric.value,
            "value": r.value,
            "unit": r.metric.unit.value,
            "timestamp": r.timestamp.isoformat().replace("+00:00", "Z"),
        }
        for r in records
    ]
    return pd.DataFrame(rows, columns=list(PER_TEST_COLUMNS))


def write_measurements_csv(records: Iterable[MeasurementRecord], out: Union[str, Path, IO]) -> None:
    """Write records in the canonical per-test schema."""
    measurements_frame(records).to_csv(out, index=False, lineterminator="\n")


def write_rejects_csv(rejects: Iterable[RowReject], out: Union[str, Path, IO]) -> None:
    frame = pd.DataFrame(
        [{"row_number": r.row_number, "reason": r.message} for r in rejects],
        columns=["row_number", "reason"],
    )
    frame.to_csv(out, index=False, lineterminator="\n")

"""
Domain types for the three-tier IQB structure.

Use cases sit on top, network requirements (metrics) in the middle and
datasets at the bottom. All models are frozen after construction.
"""

import math
import re
from datetime import datetime, timezone
from enum import Enum
from typing import Annotated, Optional

from pydantic import (
    AfterValidator,
    AwareDatetime,
    BeforeValidator,
    BaseModel,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)

DATASET_ID_PATTERN = re.compile(r"^[a-z0-9_-]+$")
# Date and time parts of an RFC 3339 timestamp; the offset is checked by AwareDatetime
RFC3339_PREFIX = re.compile(r"^\d{4}-\d{2}-\d{2}[Tt ]\d{2}:\d{2}:\d{2}")

# Datasets named in the framework: per-test NDT and Cloudflare, aggregate Ookla
CANONICAL_DATASETS = ("ndt", "ookla", "cloudflare")


class Direction(str, Enum):
    """Which side of a threshold is good."""
    higher_is_better = "higher_is_better"
    lower_is_better = "lower_is_better"


class Unit(str, Enum):
    """Canonical units. Packet loss is always a fraction in [0, 1]."""
    Mbps = "Mbps"
    ms = "ms"
    fraction = "fraction"


class MetricKind(str, Enum):
    """Network requirement measured by the datasets."""
    download_throughput = "download_throughput"
    upload_throughput = "upload_throughput"
    latency = "latency"
    packet_loss = "packet_loss"

    @property
    def direction(self) -> Direction:
        return METRIC_INFO[self][0]

    @property
    def unit(self) -> Unit:
        return METRIC_INFO[self][1]

    @property
    def higher_is_better(self) -> bool:
        return self.direction is Direction.higher_is_better


METRIC_INFO: dict[MetricKind, tuple[Direction, Unit]] = {
    MetricKind.download_throughput: (Direction.higher_is_better, Unit.Mbps),
    MetricKind.upload_throughput: (Direction.higher_is_better, Unit.Mbps),
    MetricKind.latency: (Direction.lower_is_better, Unit.ms),
    MetricKind.packet_loss: (Direction.lower_is_better, Unit.fraction),
}


class UseCase(str, Enum):
    """User-facing activities, in weight-table row order."""
    web_browsing = "web_browsing"
    video_streaming = "video_streaming"
    audio_streaming = "audio_streaming"
    video_conferencing = "video_conferencing"
    online_backup = "online_backup"
    gaming = "gaming"


class QualityLevel(str, Enum):
    minimum = "minimum"
    high = "high"


class Granularity(str, Enum):
    """per_test: individual measurements; pre_aggregated: published statistics."""
    per_test = "per_test"
    pre_aggregated = "pre_aggregated"


class Statistic(str, Enum):
    """How an AggregateStat value was obtained."""
    p95_tail = "p95_tail"
    literal_p95 = "literal_p95"
    provided = "provided"


class AggregationMode(str, Enum):
    tail = "tail"
    literal = "literal"


class Severity(str, Enum):
    warning = "warning"
    error = "error"


def _check_dataset_id(value: str) -> str:
    if not DATASET_ID_PATTERN.match(value):
        raise ValueError(f"invalid dataset id {value!r}: must match [a-z0-9_-]+")
    return value


DatasetId = Annotated[str, AfterValidator(_check_dataset_id)]


class Finding(BaseModel):
    """One validation or data-quality finding, addressed by a dotted key path."""
    model_config = ConfigDict(frozen=True)

    code: str
    key: str
    message: str
    severity: Severity = Severity.error

    def __str__(self) -> str:
        return f"{self.key}: {self.message}"


def warning(code: str, key: str, message: str) -> Finding:
    return Finding(code=code, key=key, message=message, severity=Severity.warning)


class DatasetEntry(BaseModel):
    """A dataset declared in the scoring config."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: DatasetId
    granularity: Granularity
    # Statistic a pre-aggregated source is expected to publish
    statistic: str = "p95"
    # Adapter spec path, relative to the config file
    adapter: Optional[str] = None


def _check_value(value: float) -> float:
    if not math.isfinite(value) or value < 0:
        raise ValueError("value out of range")
    return value


def _check_timestamp(value: object) -> object:
    if isinstance(value, datetime):
        return value
    if isinstance(value, str) and RFC3339_PREFIX.match(value.strip()):
        return value.strip()
    raise ValueError(f"not an RFC 3339 timestamp: {value!r}")


class MeasurementRecord(BaseModel):
    """One raw measurement sample in canonical units."""
    model_config = ConfigDict(frozen=True)

    region_id: str = Field(min_length=1)
    dataset: DatasetId
    metric: MetricKind
    value: Annotated[float, AfterValidator(_check_value)]
    timestamp: Annotated[AwareDatetime, BeforeValidator(_check_timestamp)]

    @field_validator("timestamp")
    @classmethod
    def _to_utc(cls, ts: datetime) -> datetime:
        return ts.astimezone(timezone.utc)

    @model_validator(mode="after")
    def _check_packet_loss(self) -> "MeasurementRecord":
        if self.metric is MetricKind.packet_loss and self.value > 1:
            raise ValueError("value out of range")
        return self


AggregateKey = tuple[str, str, MetricKind]


class AggregateStat(BaseModel):
    """One aggregated statistic per (region, dataset, metric)."""
    model_config = ConfigDict(frozen=True)

    region_id: str = Field(min_length=1)
    dataset: DatasetId
    metric: MetricKind
    statistic: Statistic
    value: Annotated[float, AfterValidator(_check_value)]
    sample_count: int = Field(ge=0)
    # Nominal percentile for computed stats
    percentile: Optional[float] = None
    # Statistic name declared by a pre-aggregated source (e.g. "p95", "mean")
    source_statistic: Optional[str] = None
    warnings: tuple[Finding, ...] = ()

    @model_validator(mode="after")
    def _check_samples(self) -> "AggregateStat":
        if self.statistic is not Statistic.provided and self.sample_count < 1:
            raise ValueError("computed statistic needs at least one sample")
        return self

    @property
    def key(self) -> AggregateKey:
        return (self.region_id, self.dataset, self.metric)

    def with_warnings(self, *findings: Finding) -> "AggregateStat":
        return self.model_copy(update={"warnings": self.warnings + tuple(findings)})


def key_path(*parts) -> str:
    """Dotted key path from enum members and strings."""
    return ".".join(p.value if isinstance(p, Enum) else str(p) for p in parts)

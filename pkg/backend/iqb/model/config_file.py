"""
Scoring configuration document (YAML).

Sections:
- weights:     three tiers keyed by use-case / metric / dataset tokens (optional,
               each absent tier falls back to default_weight_table())
- thresholds:  rows of use_case, metric, minimum, high, unit
- datasets:    id, granularity, statistic, optional adapter spec path
- aggregation: percentile, mode, min_samples (optional)

Unknown keys anywhere in the document are parse errors.
"""

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from backend.iqb.errors import ConfigError

from .thresholds import ThresholdTable, validate_threshold_table
from .types import (
    AggregationMode,
    DatasetEntry,
    DatasetId,
    Finding,
    MetricKind,
    QualityLevel,
    UseCase,
    key_path,
)
from .units import to_canonical
from .weights import WeightTable, default_weight_table, validate_weight_table

logger = logging.getLogger(__name__)


# =============================================================================
# DOCUMENT SCHEMA
# =============================================================================

class ThresholdRow(BaseModel):
    model_config = ConfigDict(extra="forbid")

    use_case: UseCase
    metric: MetricKind
    minimum: Optional[float] = None
    high: Optional[float] = None
    unit: Optional[str] = None


class WeightsSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    use_case_weights: Optional[dict[UseCase, int]] = None
    requirement_weights: Optional[dict[UseCase, dict[MetricKind, int]]] = None
    dataset_weights: Optional[dict[UseCase, dict[MetricKind, dict[DatasetId, int]]]] = None


class AggregationSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    percentile: float = Field(default=95.0, gt=0, lt=100)
    mode: AggregationMode = AggregationMode.tail
    min_samples: int = Field(default=30, ge=1)


class ConfigDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    weights: Optional[WeightsSection] = None
    thresholds: list[ThresholdRow]
    datasets: list[DatasetEntry] = Field(min_length=1)
    aggregation: AggregationSettings = Field(default_factory=AggregationSettings)


@dataclass(frozen=True)
class ScoringConfig:
    """Resolved configuration: tables in canonical units plus dataset declarations."""
    weights: WeightTable
    thresholds: ThresholdTable
    datasets: tuple[DatasetEntry, ...]
    aggregation: AggregationSettings = field(default_factory=AggregationSettings)
    # Directory adapter paths are resolved against
    base_dir: Optional[Path] = field(default=None, compare=False)

    def dataset(self, dataset_id: str) -> Optional[DatasetEntry]:
        return next((d for d in self.datasets if d.id == dataset_id), None)

    def adapter_path(self, dataset_id: str) -> Optional[Path]:
        entry = self.dataset(dataset_id)
        if entry is None or entry.adapter is None:
            return None
        path = Path(entry.adapter)
        return path if path.is_absolute() or self.base_dir is None else self.base_dir / path


# =============================================================================
# PARSING
# =============================================================================

def _thresholds_from_rows(rows: list[ThresholdRow]) -> ThresholdTable:
    entries = {}
    for row in rows:
        for level in QualityLevel:
            value = getattr(row, level.value)
            if value is None:
                continue
            key = (row.use_case, row.metric, level)
            if key in entries:
                raise ConfigError(f"duplicate threshold for {key_path('thresholds', *key)}")
            try:
                entries[key] = to_canonical(value, row.unit, row.metric)
            except ValueError as e:
                raise ConfigError(f"{key_path('thresholds', row.use_case, row.metric)}: {e}") from e
    return ThresholdTable(entries=entries)


def _resolve_weights(section: Optional[WeightsSection], datasets: list[DatasetEntry]) -> WeightTable:
    defaults = default_weight_table(d.id for d in datasets)
    if section is None:
        return defaults
    return WeightTable(
        use_case_weights=section.use_case_weights
        if section.use_case_weights is not None else defaults.use_case_weights,
        requirement_weights=section.requirement_weights
        if section.requirement_weights is not None else defaults.requirement_weights,
        dataset_weights=section.dataset_weights
        if section.dataset_weights is not None else defaults.dataset_weights,
    )


def parse_config(text: str, base_dir: Optional[Path] = None) -> ScoringConfig:
    """Parse a YAML config document. Raises ConfigError with diagnostics."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping with weights, thresholds and datasets sections")
    try:
        doc = ConfigDocument.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid config:\n{e}") from e

    return ScoringConfig(
        weights=_resolve_weights(doc.weights, doc.datasets),
        thresholds=_thresholds_from_rows(doc.thresholds),
        datasets=tuple(doc.datasets),
        aggregation=doc.aggregation,
        base_dir=base_dir,
    )


def load_config(path: Path | str) -> ScoringConfig:
    """Read and parse a config file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    config = parse_config(text, base_dir=path.resolve().parent)
    logger.debug("Loaded config %s (%d datasets)", path, len(config.datasets))
    return config


# =============================================================================
# SERIALIZATION
# =============================================================================

def _threshold_rows(t: ThresholdTable) -> list[dict]:
    rows = []
    for u, r in t.pairs():
        row = {"use_case": u.value, "metric": r.value}
        for level in QualityLevel:
            value = t.get(u, r, level)
            if value is not None:
                row[level.value] = value
        row["unit"] = r.unit.value
        rows.append(row)
    return rows


def config_to_dict(config: ScoringConfig) -> dict:
    """Canonical plain-data form of a resolved config."""
    return {
        "weights": config.weights.model_dump(mode="json"),
        "thresholds": _threshold_rows(config.thresholds),
        "datasets": [d.model_dump(mode="json", exclude_none=True) for d in config.datasets],
        "aggregation": config.aggregation.model_dump(mode="json"),
    }


def dump_config(config: ScoringConfig) -> str:
    """Canonical YAML for a resolved config; parse_config(dump_config(c)) == c."""
    return yaml.safe_dump(config_to_dict(config), sort_keys=False, allow_unicode=True)


def config_digest(config: ScoringConfig) -> str:
    """sha256 of the canonical dump."""
    return hashlib.sha256(dump_config(config).encode("utf-8")).hexdigest()


# =============================================================================
# VALIDATION
# =============================================================================

def validate_config(config: ScoringConfig) -> list[Finding]:
    """Both table validators plus cross-section checks."""
    findings = validate_weight_table(config.weights) + validate_threshold_table(config.thresholds)

    seen: set[str] = set()
    for entry in config.datasets:
        if entry.id in seen:
            findings.append(Finding(
                code="duplicate_dataset",
                key=key_path("datasets", entry.id),
                message=f"duplicate dataset id {entry.id!r}",
            ))
        seen.add(entry.id)

    for d in sorted(config.weights.dataset_ids() - seen):
        findings.append(Finding(
            code="unknown_dataset",
            key=key_path("weights", "dataset_weights", d),
            message=f"dataset {d!r} has weights but is not declared in datasets",
        ))

    for entry in config.datasets:
        path = config.adapter_path(entry.id)
        if path is not None and not path.exists():
            findings.append(Finding(
                code="missing_adapter",
                key=key_path("datasets", entry.id, "adapter"),
                message=f"adapter spec not found: {path}",
            ))

    return findings

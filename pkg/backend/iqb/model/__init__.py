# Domain types, weight and threshold tables, config document
from .config_file import (
    AggregationSettings,
    ScoringConfig,
    config_digest,
    dump_config,
    load_config,
    parse_config,
    validate_config,
)
from .thresholds import ThresholdTable, validate_threshold_table
from .types import (
    CANONICAL_DATASETS,
    AggregateKey,
    AggregateStat,
    AggregationMode,
    DatasetEntry,
    Direction,
    Finding,
    Granularity,
    MeasurementRecord,
    MetricKind,
    QualityLevel,
    Severity,
    Statistic,
    Unit,
    UseCase,
)
from .weights import (
    NormalizedWeights,
    WeightTable,
    default_weight_table,
    normalize_weights,
    validate_weight_table,
)

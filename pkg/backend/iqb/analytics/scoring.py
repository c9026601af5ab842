"""
IQB Score Builder

Works upward from the datasets tier:
- binary requirement score S_{u,r,d}: aggregate meets the (u, r) threshold
- requirement agreement S_{u,r}: weighted average over datasets
- use-case score S_u: weighted average over requirements
- IQB score: weighted average over use cases

The nested form renormalizes over the cells that have data (with a warning);
the flat form (triple sum of normalized weight products) requires full
coverage and is used to cross-check the nested form.

IMPORTANT:
- Missing data is never scored as 0; it is excluded and reported
- Boundary equality counts as meeting a threshold
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, TypeVar

from backend.iqb.errors import CoverageError, InsufficientDataError, UnscorableError
from backend.iqb.model import (
    AggregateKey,
    AggregateStat,
    Direction,
    Finding,
    MetricKind,
    NormalizedWeights,
    QualityLevel,
    ThresholdTable,
    UseCase,
    WeightTable,
    normalize_weights,
)
from backend.iqb.model.types import key_path, warning

logger = logging.getLogger(__name__)

K = TypeVar("K")
CellKey = tuple[UseCase, MetricKind, str]


@dataclass(frozen=True)
class BinaryScoreMatrix:
    """S_{u,r,d} for the cells that have data; absent cells are not zeros."""
    entries: dict[CellKey, int] = field(default_factory=dict)

    def __post_init__(self):
        for key, score in self.entries.items():
            if score not in (0, 1) or isinstance(score, float):
                raise ValueError(f"binary score must be 0 or 1, got {score!r} for {key_path(*key)}")

    @property
    def coverage(self) -> frozenset[CellKey]:
        return frozenset(self.entries)

    def get(self, key: CellKey) -> int | None:
        return self.entries.get(key)


@dataclass(frozen=True)
class CellDetail:
    """What went into one S_{u,r,d}."""
    aggregate_value: float
    threshold: float
    statistic: str
    sample_count: int
    # Effective weight w'_u * w'_{u,r} * w'_{u,r,d}, renormalized over coverage
    weight: float


@dataclass(frozen=True)
class ScoreReport:
    region_id: str
    quality_level: QualityLevel
    s_urd: BinaryScoreMatrix
    s_ur: dict[tuple[UseCase, MetricKind], float]
    s_u: dict[UseCase, float]
    s_iqb: float
    # weight x S per cell; sums to s_iqb
    contributions: dict[CellKey, float]
    cells: dict[CellKey, CellDetail]
    warnings: tuple[Finding, ...] = ()


# =============================================================================
# SCORE FORMULAS
# =============================================================================

def _weighted_average(scores: Mapping[K, float], weights: Mapping[K, int], tier: str, key: str) -> float:
    """sum(w * S) / sum(w) over the keys present in `scores`."""
    total = math.fsum(weights.get(k, 0) for k in scores)
    if total <= 0:
        raise UnscorableError(tier, key, f"unscorable {tier}: no positive weight among present keys of {key}")
    return math.fsum(weights.get(k, 0) * s for k, s in scores.items()) / total


def binary_requirement_score(stat: AggregateStat | float, threshold: float, direction: Direction) -> int:
    """1 iff the aggregate meets the threshold (inclusive), else 0."""
    value = stat.value if isinstance(stat, AggregateStat) else float(stat)
    if not math.isfinite(value):
        raise ValueError(f"aggregate value must be finite: {value!r}")
    if direction is Direction.higher_is_better:
        return int(value >= threshold)
    return int(value <= threshold)


def requirement_agreement_score(scores: Mapping[str, int], weights: Mapping[str, int], key: str = "requirement") -> float:
    """S_{u,r}: weighted average of binary scores over the datasets present in `scores`."""
    return _weighted_average(scores, weights, "requirement", key)


def use_case_score(agreement: Mapping[MetricKind, float], weights: Mapping[MetricKind, int], key: str = "use_case") -> float:
    """S_u: weighted average of agreement scores over the requirements present."""
    return _weighted_average(agreement, weights, "use_case", key)


def iqb_score(use_case_scores: Mapping[UseCase, float], weights: Mapping[UseCase, int]) -> float:
    """S_IQB: weighted average of use-case scores."""
    return _weighted_average(use_case_scores, weights, "iqb", "iqb")


def iqb_score_flat(s_urd: BinaryScoreMatrix, nw: NormalizedWeights) -> float:
    """
    Triple sum of w'_u * w'_{u,r} * w'_{u,r,d} * S_{u,r,d}.

    Does not renormalize: every cell with a positive weight product must be present.
    """
    terms = []
    for (u, r, d) in nw.dataset:
        product = nw.product(u, r, d)
        if product == 0:
            continue
        score = s_urd.get((u, r, d))
        if score is None:
            raise CoverageError(f"flat form requires full coverage: missing {key_path(u, r, d)}")
        terms.append(product * score)
    return math.fsum(terms)


# =============================================================================
# REGION SCORING
# =============================================================================

def score_region(
    matrix: Mapping[AggregateKey, AggregateStat],
    thresholds: ThresholdTable,
    weights: WeightTable,
    region: str,
    level: QualityLevel = QualityLevel.high,
) -> ScoreReport:
    """
    Score one region end to end.

    Raises InsufficientDataError when the region has no aggregates or no
    scorable use case, and UnscorableError for a zero-sum weight tier.
    """
    stats = {(d, m): s for (rg, d, m), s in matrix.items() if rg == region}
    if not stats:
        raise InsufficientDataError(f"insufficient data: no aggregates for region {region!r}")

    # Fails fast on an unscorable configuration
    normalize_weights(weights)

    findings: list[Finding] = []
    for key in sorted(stats, key=lambda k: (k[0], k[1].value)):
        findings.extend(stats[key].warnings)

    s_urd: dict[CellKey, int] = {}
    cells: dict[CellKey, tuple[AggregateStat, float]] = {}
    s_ur: dict[tuple[UseCase, MetricKind], float] = {}
    s_u: dict[UseCase, float] = {}

    for u in UseCase:
        if weights.use_case_weights.get(u, 0) <= 0:
            continue
        agreement: dict[MetricKind, float] = {}
        for r, w_ur in weights.requirement_weights.get(u, {}).items():
            if w_ur <= 0:
                continue
            threshold = thresholds.get(u, r, level)
            if threshold is None:
                findings.append(warning(
                    "no_threshold", key_path(u, r),
                    f"no {level.value} threshold for ({u.value}, {r.value}); requirement skipped",
                ))
                continue
            dataset_weights = weights.datasets_for(u, r)
            present: dict[str, int] = {}
            for d in sorted(dataset_weights):
                if dataset_weights[d] <= 0:
                    continue
                stat = stats.get((d, r))
                if stat is None:
                    findings.append(warning(
                        "missing_dataset", key_path(u, r, d),
                        f"no aggregate for ({u.value}, {r.value}, {d}); "
                        "weights renormalized over present datasets",
                    ))
                    continue
                present[d] = binary_requirement_score(stat, threshold, r.direction)
                s_urd[(u, r, d)] = present[d]
                cells[(u, r, d)] = (stat, threshold)
            if not present:
                findings.append(warning(
                    "missing_requirement", key_path(u, r),
                    f"no dataset covers ({u.value}, {r.value}); "
                    "weights renormalized over present requirements",
                ))
                continue
            s_ur[(u, r)] = requirement_agreement_score(present, dataset_weights, key_path(u, r))
            agreement[r] = s_ur[(u, r)]
        if not agreement:
            findings.append(warning(
                "missing_use_case", key_path(u),
                f"no requirement of {u.value} has data; weights renormalized over present use cases",
            ))
            continue
        s_u[u] = use_case_score(agreement, weights.requirement_weights[u], key_path(u))

    if not s_u:
        raise InsufficientDataError(f"insufficient data: no scorable use case for region {region!r}")

    s_iqb = iqb_score(s_u, weights.use_case_weights)

    # Effective weights over coverage
    u_total = math.fsum(weights.use_case_weights[u] for u in s_u)
    contributions: dict[CellKey, float] = {}
    details: dict[CellKey, CellDetail] = {}
    for (u, r, d), (stat, threshold) in cells.items():
        r_total = math.fsum(weights.requirement_weights[u][rr] for (uu, rr) in s_ur if uu == u)
        d_total = math.fsum(weights.datasets_for(u, r)[dd] for (uu, rr, dd) in cells if uu == u and rr == r)
        weight = (
            weights.use_case_weights[u] / u_total
            * weights.requirement_weights[u][r] / r_total
            * weights.datasets_for(u, r)[d] / d_total
        )
        contributions[(u, r, d)] = weight * s_urd[(u, r, d)]
        details[(u, r, d)] = CellDetail(
            aggregate_value=stat.value,
            threshold=threshold,
            statistic=stat.source_statistic or stat.statistic.value,
            sample_count=stat.sample_count,
            weight=weight,
        )

    logger.info("Region %s (%s): S_IQB = %.6f", region, level.value, s_iqb)
    return ScoreReport(
        region_id=region,
        quality_level=level,
        s_urd=BinaryScoreMatrix(entries=s_urd),
        s_ur=s_ur,
        s_u=s_u,
        s_iqb=s_iqb,
        contributions=contributions,
        cells=details,
        warnings=tuple(findings),
    )

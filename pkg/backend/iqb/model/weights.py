"""
Weight tiers for the IQB score.

Three integer tiers, each in [0, 5]:
- use_case_weights:     w_u
- requirement_weights:  w_{u,r}
- dataset_weights:      w_{u,r,d}

Normalization divides each weight by its tier sum (per use case for the
requirement tier, per (use case, requirement) for the dataset tier).
"""

from dataclasses import dataclass
from typing import Iterable

from pydantic import BaseModel, ConfigDict, Field

from backend.iqb.errors import UnscorableError

from .types import CANONICAL_DATASETS, DatasetId, Finding, MetricKind, UseCase, key_path

WEIGHT_MIN = 0
WEIGHT_MAX = 5

# =============================================================================
# REQUIREMENT WEIGHTS (expert survey, importance 1-5)
# =============================================================================
# Columns: download, upload, latency, packet loss
REQUIREMENT_WEIGHTS_TABLE: dict[UseCase, tuple[int, int, int, int]] = {
    UseCase.web_browsing:       (3, 2, 4, 4),
    UseCase.video_streaming:    (4, 2, 4, 4),
    UseCase.audio_streaming:    (4, 1, 3, 4),
    UseCase.video_conferencing: (4, 4, 4, 4),
    UseCase.online_backup:      (4, 4, 2, 4),
    UseCase.gaming:             (4, 4, 5, 4),
}

TABLE_COLUMNS = (
    MetricKind.download_throughput,
    MetricKind.upload_throughput,
    MetricKind.latency,
    MetricKind.packet_loss,
)


class WeightTable(BaseModel):
    """
    Integer weights for all three tiers.

    Values are not range-checked on construction so that a bad config can be
    reported as findings by validate_weight_table().
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    use_case_weights: dict[UseCase, int] = Field(default_factory=dict)
    requirement_weights: dict[UseCase, dict[MetricKind, int]] = Field(default_factory=dict)
    dataset_weights: dict[UseCase, dict[MetricKind, dict[DatasetId, int]]] = Field(default_factory=dict)

    def requirement_pairs(self) -> list[tuple[UseCase, MetricKind]]:
        return [(u, r) for u, row in self.requirement_weights.items() for r in row]

    def datasets_for(self, use_case: UseCase, metric: MetricKind) -> dict[str, int]:
        return self.dataset_weights.get(use_case, {}).get(metric, {})

    def dataset_ids(self) -> set[str]:
        return {d for row in self.dataset_weights.values() for cell in row.values() for d in cell}

    def scaled(self, tier: str, k: int) -> "WeightTable":
        """Copy with every weight of one tier multiplied by k."""
        if tier == "use_case":
            update = {"use_case_weights": {u: w * k for u, w in self.use_case_weights.items()}}
        elif tier == "requirement":
            update = {"requirement_weights": {
                u: {r: w * k for r, w in row.items()} for u, row in self.requirement_weights.items()
            }}
        elif tier == "dataset":
            update = {"dataset_weights": {
                u: {r: {d: w * k for d, w in cell.items()} for r, cell in row.items()}
                for u, row in self.dataset_weights.items()
            }}
        else:
            raise ValueError(f"unknown tier {tier!r}")
        return self.model_copy(update=update)


@dataclass(frozen=True)
class NormalizedWeights:
    """Weights divided by their tier sums; every tier sums to 1."""
    use_case: dict[UseCase, float]
    requirement: dict[tuple[UseCase, MetricKind], float]
    dataset: dict[tuple[UseCase, MetricKind, str], float]

    def product(self, use_case: UseCase, metric: MetricKind, dataset: str) -> float:
        """w'_u * w'_{u,r} * w'_{u,r,d}"""
        return (
            self.use_case.get(use_case, 0.0)
            * self.requirement.get((use_case, metric), 0.0)
            * self.dataset.get((use_case, metric, dataset), 0.0)
        )


def default_weight_table(datasets: Iterable[str] = CANONICAL_DATASETS) -> WeightTable:
    """
    Requirement weights from the survey table; use-case and dataset weights uniform (1).
    """
    datasets = list(datasets)
    return WeightTable(
        use_case_weights={u: 1 for u in UseCase},
        requirement_weights={
            u: dict(zip(TABLE_COLUMNS, row)) for u, row in REQUIREMENT_WEIGHTS_TABLE.items()
        },
        dataset_weights={
            u: {r: {d: 1 for d in datasets} for r in TABLE_COLUMNS} for u in UseCase
        },
    )


def _out_of_range(value) -> bool:
    return isinstance(value, bool) or not isinstance(value, int) or not WEIGHT_MIN <= value <= WEIGHT_MAX


def validate_weight_table(w: WeightTable) -> list[Finding]:
    """Return one finding per violated WeightTable invariant; empty when valid."""
    findings: list[Finding] = []

    def out_of_range(path: str, value) -> None:
        findings.append(Finding(
            code="weight_out_of_range",
            key=path,
            message=f"weight out of range [{WEIGHT_MIN},{WEIGHT_MAX}]: {value!r}",
        ))

    for u, value in w.use_case_weights.items():
        if _out_of_range(value):
            out_of_range(key_path("weights", "use_case_weights", u), value)
    for u, row in w.requirement_weights.items():
        for r, value in row.items():
            if _out_of_range(value):
                out_of_range(key_path("weights", "requirement_weights", u, r), value)
    for u, row in w.dataset_weights.items():
        for r, cell in row.items():
            for d, value in cell.items():
                if _out_of_range(value):
                    out_of_range(key_path("weights", "dataset_weights", u, r, d), value)

    if not any(v > 0 for v in w.use_case_weights.values()):
        findings.append(Finding(
            code="no_positive_weight",
            key="weights.use_case_weights",
            message="no positive use case weight",
        ))

    for u in w.use_case_weights:
        row = w.requirement_weights.get(u, {})
        if not any(v > 0 for v in row.values()):
            findings.append(Finding(
                code="no_positive_weight",
                key=key_path("weights", "requirement_weights", u),
                message=f"no positive requirement weight for {u.value}",
            ))

    for u, r in w.requirement_pairs():
        if not any(v > 0 for v in w.datasets_for(u, r).values()):
            findings.append(Finding(
                code="no_positive_weight",
                key=key_path("weights", "dataset_weights", u, r),
                message=f"no positive dataset weight for ({u.value}, {r.value})",
            ))

    return findings


def _normalize(weights: dict, tier: str, key: str) -> dict:
    total = sum(weights.values())
    if total <= 0:
        raise UnscorableError(tier, key)
    return {k: v / total for k, v in weights.items()}


def normalize_weights(w: WeightTable) -> NormalizedWeights:
    """
    Divide each tier by its tier sum.

    Raises UnscorableError naming the tier and key when a tier sums to zero.
    """
    use_case = _normalize(dict(w.use_case_weights), "use_case", "weights.use_case_weights")

    requirement: dict[tuple[UseCase, MetricKind], float] = {}
    for u, row in w.requirement_weights.items():
        for r, value in _normalize(row, "requirement", key_path("weights.requirement_weights", u)).items():
            requirement[(u, r)] = value

    dataset: dict[tuple[UseCase, MetricKind, str], float] = {}
    for u, r in w.requirement_pairs():
        cell = w.datasets_for(u, r)
        for d, value in _normalize(cell, "dataset", key_path("weights.dataset_weights", u, r)).items():
            dataset[(u, r, d)] = value

    return NormalizedWeights(use_case=use_case, requirement=requirement, dataset=dataset)

"""
Report rendering: JSON and CSV score reports, aggregate CSV, explain tables
and the run manifest embedded in every JSON report.

Ordering is lexicographic on tokens everywhere so outputs can be compared
byte for byte.
"""

import hashlib
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import pandas as pd
from pydantic import TypeAdapter

from backend.iqb import __version__
from backend.iqb.analytics.scoring import ScoreReport
from backend.iqb.model import AggregateKey, AggregateStat, ScoringConfig, UseCase, config_digest

from .schemas import (
    DatasetScore,
    FindingItem,
    InputDigest,
    RequirementScore,
    RunManifest,
    ScoreReportDocument,
    UseCaseScore,
)

DECIMALS = 6
FLOAT_FORMAT = f"%.{DECIMALS}f"
# Tolerance for the explain footer consistency check
EXPLAIN_TOLERANCE = 1e-9

AGGREGATE_COLUMNS = ["region_id", "dataset_id", "metric", "statistic", "value", "unit", "sample_count"]
SCORE_COLUMNS = [
    "region_id", "quality_level", "use_case", "metric", "dataset", "binary_score",
    "aggregate_value", "threshold", "weight", "contribution",
    "requirement_score", "use_case_score", "s_iqb",
]
EXPLAIN_COLUMNS = ["use_case", "metric", "dataset", "binary_score", "weight", "contribution"]


def _r(x: float) -> float:
    return round(x, DECIMALS)


# =============================================================================
# MANIFEST
# =============================================================================

def sha256_file(path: Path | str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def build_manifest(
    config: ScoringConfig,
    inputs: Sequence[Path | str],
    parameters: Mapping[str, object],
    source_date_epoch: Optional[int] = None,
) -> RunManifest:
    """Manifest for a run; started_at honours SOURCE_DATE_EPOCH when given."""
    if source_date_epoch is not None:
        started = datetime.fromtimestamp(source_date_epoch, tz=timezone.utc)
    else:
        started = datetime.now(timezone.utc).replace(microsecond=0)
    return RunManifest(
        config_digest=config_digest(config),
        input_digests=[InputDigest(path=str(p), sha256=sha256_file(p)) for p in inputs],
        tool_version=__version__,
        started_at=started.isoformat().replace("+00:00", "Z"),
        parameters={k: "" if v is None else str(v) for k, v in sorted(parameters.items())},
    )


# =============================================================================
# SCORE REPORTS
# =============================================================================

def report_document(report: ScoreReport, manifest: Optional[RunManifest] = None) -> ScoreReportDocument:
    """Nested JSON form: use cases -> requirements -> datasets."""
    use_cases = []
    for u in sorted(report.s_u, key=lambda u: u.value):
        requirements = []
        for (_, r) in sorted((k for k in report.s_ur if k[0] is u), key=lambda k: k[1].value):
            datasets = [
                DatasetScore(
                    dataset=d,
                    binary_score=report.s_urd.entries[(u, r, d)],
                    aggregate_value=_r(detail.aggregate_value),
                    threshold=_r(detail.threshold),
                    statistic=detail.statistic,
                    sample_count=detail.sample_count,
                    weight=_r(detail.weight),
                    contribution=_r(report.contributions[(u, r, d)]),
                )
                for (u3, r3, d), detail in sorted(report.cells.items(), key=lambda item: item[0][2])
                if u3 is u and r3 is r
            ]
            requirements.append(RequirementScore(metric=r.value, score=_r(report.s_ur[(u, r)]), datasets=datasets))
        use_cases.append(UseCaseScore(use_case=u.value, score=_r(report.s_u[u]), requirements=requirements))

    return ScoreReportDocument(
        region_id=report.region_id,
        quality_level=report.quality_level,
        s_iqb=_r(report.s_iqb),
        use_cases=use_cases,
        warnings=[FindingItem(**f.model_dump(include={"code", "key", "message", "severity"})) for f in report.warnings],
        manifest=manifest,
    )


def reports_to_json(documents: Sequence[ScoreReportDocument]) -> str:
    return TypeAdapter(list[ScoreReportDocument]).dump_json(list(documents), indent=2).decode("utf-8") + "\n"


def reports_frame(reports: Iterable[ScoreReport]) -> pd.DataFrame:
    """One row per (region, use case, metric, dataset)."""
    rows = []
    for report in reports:
        for (u, r, d) in sorted(report.cells, key=lambda k: (k[0].value, k[1].value, k[2])):
            detail = report.cells[(u, r, d)]
            rows.append({
                "region_id": report.region_id,
                "quality_level": report.quality_level.value,
                "use_case": u.value,
                "metric": r.value,
                "dataset": d,
                "binary_score": report.s_urd.entries[(u, r, d)],
                "aggregate_value": detail.aggregate_value,
                "threshold": detail.threshold,
                "weight": detail.weight,
                "contribution": report.contributions[(u, r, d)],
                "requirement_score": report.s_ur[(u, r)],
                "use_case_score": report.s_u[u],
                "s_iqb": report.s_iqb,
            })
    return pd.DataFrame(rows, columns=SCORE_COLUMNS)


def reports_to_csv(reports: Iterable[ScoreReport]) -> str:
    return reports_frame(reports).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


# =============================================================================
# EXPLAIN
# =============================================================================

def explain_frame(report: ScoreReport, use_case: Optional[UseCase] = None) -> pd.DataFrame:
    """Each w'_u * w'_{u,r} * w'_{u,r,d} * S_{u,r,d} term, largest first."""
    rows = [
        {
            "use_case": u.value,
            "metric": r.value,
            "dataset": d,
            "binary_score": report.s_urd.entries[(u, r, d)],
            "weight": report.cells[(u, r, d)].weight,
            "contribution": report.contributions[(u, r, d)],
        }
        for (u, r, d) in report.cells
        if use_case is None or u is use_case
    ]
    frame = pd.DataFrame(rows, columns=EXPLAIN_COLUMNS)
    # Stable tie-break on the key columns
    frame = frame.sort_values(["use_case", "metric", "dataset"], kind="mergesort")
    return frame.sort_values("contribution", ascending=False, kind="mergesort").reset_index(drop=True)


def render_explain(report: ScoreReport, use_case: Optional[UseCase] = None) -> tuple[str, bool]:
    """
    Contribution table plus a footer restating S_IQB.

    Returns the text and whether the satisfied-cell contributions sum to S_IQB.
    """
    frame = explain_frame(report, use_case)
    satisfied = math.fsum(c for (k, c) in report.contributions.items() if report.s_urd.entries[k] == 1)
    consistent = abs(satisfied - report.s_iqb) <= EXPLAIN_TOLERANCE
    shown = math.fsum(frame.loc[frame["binary_score"] == 1, "contribution"])

    table = frame.to_string(index=False, float_format=lambda x: f"{x:.{DECIMALS}f}") if len(frame) else "(no cells)"
    footer = [
        f"region_id: {report.region_id}  quality_level: {report.quality_level.value}",
        f"printed satisfied contributions: {shown:.{DECIMALS}f}",
        f"sum of satisfied contributions: {satisfied:.{DECIMALS}f}",
        f"s_iqb: {report.s_iqb:.{DECIMALS}f}  ({'consistent' if consistent else 'MISMATCH'})",
    ]
    return table + "\n\n" + "\n".join(footer) + "\n", consistent


# =============================================================================
# AGGREGATES
# =============================================================================

def aggregates_frame(matrix: Mapping[AggregateKey, AggregateStat]) -> pd.DataFrame:
    """Aggregates in the pre-aggregated CSV schema, (region, dataset, metric) order."""
    rows = [
        {
            "region_id": stat.region_id,
            "dataset_id": stat.dataset,
            "metric": stat.metric.value,
            "statistic": stat.source_statistic or stat.statistic.value,
            "value": stat.value,
            "unit": stat.metric.unit.value,
            "sample_count": stat.sample_count,
        }
        for _, stat in sorted(matrix.items(), key=lambda item: (item[0][0], item[0][1], item[0][2].value))
    ]
    return pd.DataFrame(rows, columns=AGGREGATE_COLUMNS)


def aggregates_to_csv(matrix: Mapping[AggregateKey, AggregateStat]) -> str:
    return aggregates_frame(matrix).to_csv(index=False, lineterminator="\n")

"""
Pydantic models for machine-readable reports.
All floats are rounded to 6 decimals before they reach these models.
"""

from typing import Optional

from pydantic import BaseModel, Field

from backend.iqb.model import QualityLevel, Severity


# =============================================================================
# 1. Run Manifest
# =============================================================================

class InputDigest(BaseModel):
    path: str
    sha256: str


class RunManifest(BaseModel):
    """Provenance of a run. Equal manifests (minus started_at) give equal reports."""
    config_digest: str
    input_digests: list[InputDigest]
    tool_version: str
    started_at: str
    parameters: dict[str, str] = Field(default_factory=dict)


# =============================================================================
# 2. Score Report
# =============================================================================

class DatasetScore(BaseModel):
    """One S_{u,r,d} cell."""
    dataset: str
    binary_score: int
    aggregate_value: float
    threshold: float
    statistic: str
    sample_count: int
    weight: float = Field(description="Effective weight w'_u * w'_{u,r} * w'_{u,r,d}")
    contribution: float


class RequirementScore(BaseModel):
    metric: str
    score: float
    datasets: list[DatasetScore]


class UseCaseScore(BaseModel):
    use_case: str
    score: float
    requirements: list[RequirementScore]


class FindingItem(BaseModel):
    code: str
    key: str
    message: str
    severity: Severity


class ScoreReportDocument(BaseModel):
    region_id: str
    quality_level: QualityLevel
    s_iqb: float
    use_cases: list[UseCaseScore]
    warnings: list[FindingItem]
    manifest: Optional[RunManifest] = None

from .render import (
    aggregates_frame,
    aggregates_to_csv,
    build_manifest,
    explain_frame,
    render_explain,
    report_document,
    reports_frame,
    reports_to_csv,
    reports_to_json,
    sha256_file,
)
from .schemas import (
    DatasetScore,
    FindingItem,
    InputDigest,
    RequirementScore,
    RunManifest,
    ScoreReportDocument,
    UseCaseScore,
)

# Aggregation (datasets tier) and IQB scoring
from .aggregate import (
    aggregate_region,
    build_aggregate_matrix,
    nearest_rank_percentile,
    tail_percentile_for,
)
from .scoring import (
    BinaryScoreMatrix,
    ScoreReport,
    binary_requirement_score,
    iqb_score,
    iqb_score_flat,
    requirement_agreement_score,
    score_region,
    use_case_score,
)

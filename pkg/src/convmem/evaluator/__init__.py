"""Grading, consensus, metrics, statistics, and report generation."""

from .agreement import cohen_kappa, fleiss_kappa, kappa_interpretation, pairwise_kappa_matrix
from .analysis import (
    CoverageReport,
    MissingConfigsError,
    VocabSurvival,
    comparison_suite,
    coverage_partition,
    vocab_survival,
)
from .consensus import (
    ConsensusGrade,
    TIER_ESCALATED,
    TIER_STRONG,
    TIER_UNANIMOUS,
    TIER_WEAK,
    UngradeableError,
    consensus,
    consensus_votes,
)
from .grading import (
    GradeRecord,
    MockGrader,
    build_grading_prompt,
    grade_pairs,
    make_mock_graders,
    parse_grade,
)
from .metrics import (
    MetricsRow,
    compute_metrics,
    dcg,
    ndcg_at_10,
    per_query_mean_grades,
    precision_at_1,
    reciprocal_rank,
)
from .queries import Query, SampleConfig, stratified_query_sample
from .report import build_report, render_report, sort_metric_rows, write_report
from .stats import (
    ComparisonRow,
    PairedTestResult,
    bonferroni_alpha,
    bootstrap_ci,
    cohens_dz,
    normal_ci,
    paired_t,
    paired_tests,
    wilcoxon_signed_rank,
)

__all__ = [
    "cohen_kappa", "fleiss_kappa", "kappa_interpretation", "pairwise_kappa_matrix",
    "CoverageReport", "MissingConfigsError", "VocabSurvival",
    "comparison_suite", "coverage_partition", "vocab_survival",
    "ConsensusGrade", "TIER_ESCALATED", "TIER_STRONG", "TIER_UNANIMOUS", "TIER_WEAK",
    "UngradeableError", "consensus", "consensus_votes",
    "GradeRecord", "MockGrader", "build_grading_prompt", "grade_pairs",
    "make_mock_graders", "parse_grade",
    "MetricsRow", "compute_metrics", "dcg", "ndcg_at_10", "per_query_mean_grades",
    "precision_at_1", "reciprocal_rank",
    "Query", "SampleConfig", "stratified_query_sample",
    "build_report", "render_report", "sort_metric_rows", "write_report",
    "ComparisonRow", "PairedTestResult", "bonferroni_alpha", "bootstrap_ci",
    "cohens_dz", "normal_ci", "paired_t", "paired_tests", "wilcoxon_signed_rank",
]

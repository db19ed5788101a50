"""Ranking quality metrics over consensus-graded result lists.

Grades are 0-3; "relevant" for MRR/P@1 means grade 3 (perfectly
relevant). nDCG uses the graded-gain convention 2^g - 1 with a
log2(rank+1) discount, normalized by the ideal ordering of the query's
own grades; a linear-gain variant is available behind a flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

RELEVANT_GRADE = 3


@dataclass
class MetricsRow:
    config_id: str
    mrr: float
    mean_grade: float
    p_at_1: float
    ndcg_at_10: float
    n_queries: int


def reciprocal_rank(grades: Sequence[int]) -> float:
    for i, g in enumerate(grades, start=1):
        if g == RELEVANT_GRADE:
            return 1.0 / i
    return 0.0


def precision_at_1(grades: Sequence[int]) -> float:
    return 1.0 if grades and grades[0] == RELEVANT_GRADE else 0.0


def _gain(grade: int, exponential: bool) -> float:
    return float(2 ** grade - 1) if exponential else float(grade)


def dcg(grades: Sequence[int], depth: int = 10, exponential: bool = True) -> float:
    return sum(
        _gain(g, exponential) / math.log2(rank + 1)
        for rank, g in enumerate(grades[:depth], start=1)
    )


def ndcg_at_10(grades: Sequence[int], depth: int = 10, exponential: bool = True) -> float:
    ideal = dcg(sorted(grades, reverse=True), depth, exponential)
    if ideal == 0.0:
        return 0.0
    return dcg(grades, depth, exponential) / ideal


def compute_metrics(config_id: str, grades_by_query: Mapping[str, Sequence[int]],
                    strict: bool = True, exponential_gain: bool = True) -> MetricsRow:
    """Aggregate one configuration's metrics over its queries.

    ``strict`` keeps queries with empty result lists in the MRR / P@1
    denominators (contributing 0); the non-strict flag drops them from
    those two denominators only. Mean grade pools every returned result.
    """
    qids = sorted(grades_by_query)
    nonempty = [q for q in qids if grades_by_query[q]]
    rank_qids = qids if strict else nonempty
    n_rank = len(rank_qids)
    mrr = (
        sum(reciprocal_rank(grades_by_query[q]) for q in rank_qids) / n_rank
        if n_rank else 0.0
    )
    p1 = (
        sum(precision_at_1(grades_by_query[q]) for q in rank_qids) / n_rank
        if n_rank else 0.0
    )
    all_grades = [g for q in qids for g in grades_by_query[q]]
    mean_grade = sum(all_grades) / len(all_grades) if all_grades else 0.0
    ndcg = (
        sum(ndcg_at_10(grades_by_query[q], exponential=exponential_gain) for q in qids) / len(qids)
        if qids else 0.0
    )
    return MetricsRow(
        config_id=config_id,
        mrr=mrr,
        mean_grade=mean_grade,
        p_at_1=p1,
        ndcg_at_10=ndcg,
        n_queries=len(qids),
    )


def per_query_mean_grades(grades_by_query: Mapping[str, Sequence[int]]) -> dict[str, float]:
    """Per-query mean grade (0.0 for empty lists); the paired-test unit."""
    return {
        q: (sum(gs) / len(gs) if gs else 0.0)
        for q, gs in grades_by_query.items()
    }

"""Cross-config analyses: the pure-mode comparison suite, coverage
partitions between the verbatim and distilled families, and the
vocabulary-survival study.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from ..corpus import Exchange
from ..distiller import DistilledObject
from ..indexer.analysis import idf_table, idf_of_unseen, tokenize_for_index
from ..searcher import PURE_MECHANISMS, PURE_MULTI_FUSIONS, PURE_MULTI_MODES
from .metrics import MetricsRow
from .queries import Query
from .stats import ComparisonRow, bonferroni_alpha, paired_tests


class MissingConfigsError(RuntimeError):
    def __init__(self, missing: Sequence[str]):
        super().__init__(f"missing configs: {', '.join(sorted(missing))}")
        self.missing = list(missing)


def distilled_comparison_targets(mechanism: str) -> list[tuple[str, str, str]]:
    """The 10 distilled (mode, mechanism, fusion) targets per mechanism."""
    out = [("distill_core", mechanism, "passthrough")]
    for mode in PURE_MULTI_MODES:
        for fusion in PURE_MULTI_FUSIONS:
            out.append((mode, mechanism, fusion))
    return out


def comparison_suite(per_query_means: Mapping[str, Mapping[str, float]],
                     n_resamples: int = 10_000, seed: int = 0,
                     alpha: float = 0.05) -> list[ComparisonRow]:
    """Full Text baseline vs the 10 distilled configs, per mechanism.

    4 mechanisms x 10 = 40 rows; delta is baseline minus distilled
    (positive = degradation under distillation); the Bonferroni
    threshold is alpha / 40.
    """
    needed: list[tuple[str, str, str, str]] = []
    for mech in PURE_MECHANISMS:
        baseline = f"full_text:{mech}:passthrough"
        for mode, m2, fusion in distilled_comparison_targets(mech):
            needed.append((mech, baseline, f"{mode}:{m2}:{fusion}", fusion))
    missing = {c for _, b, c, _ in needed if c not in per_query_means}
    missing |= {b for _, b, _, _ in needed if b not in per_query_means}
    if missing:
        raise MissingConfigsError(sorted(missing))

    n_comparisons = len(needed)
    threshold = bonferroni_alpha(alpha, n_comparisons)
    rows: list[ComparisonRow] = []
    for i, (mech, baseline_id, config_id, fusion) in enumerate(needed):
        base = per_query_means[baseline_id]
        dist = per_query_means[config_id]
        qids = sorted(set(base) & set(dist))
        x = [base[q] for q in qids]
        y = [dist[q] for q in qids]
        res = paired_tests(x, y, n_resamples=n_resamples, seed=seed + i)
        mode = config_id.split(":", 1)[0]
        rows.append(ComparisonRow(
            mechanism=mech,
            mode=mode,
            fusion=fusion,
            baseline_config=baseline_id,
            config_id=config_id,
            delta_mean_grade=res.mean_diff,
            t_stat=res.t_stat,
            p_value_t=res.p_value_t,
            p_value_wilcoxon=res.p_value_wilcoxon,
            cohens_dz=res.cohens_dz,
            ci_low=res.ci_low,
            ci_high=res.ci_high,
            dz_ci_low=res.dz_ci_low,
            dz_ci_high=res.dz_ci_high,
            n_queries=res.n,
            significant_bonferroni=res.p_value_t < threshold,
        ))
    return rows


# ---------------------------------------------------------------------------
# Coverage partition (which family solves which query at P@1)

@dataclass
class CoverageReport:
    best_verbatim_config: str
    best_distilled_config: str
    best_verbatim_solved: int
    best_distilled_solved: int
    best_overlap: int
    best_verbatim_only: int
    best_distilled_only: int
    oracle_verbatim_solved: int
    oracle_distilled_solved: int
    oracle_overlap: int
    oracle_verbatim_only: int
    oracle_distilled_only: int
    oracle_union: int
    oracle_neither: int
    n_verbatim_configs: int
    n_distilled_configs: int
    exclusive_by_query_type: dict[str, dict[str, int]]
    best_verbatim_only_queries: list[str]
    best_distilled_only_queries: list[str]


def coverage_partition(rank1_grades: Mapping[str, Mapping[str, int]],
                       metrics: Mapping[str, MetricsRow],
                       queries: Sequence[Query]) -> CoverageReport:
    """Partition queries by which config family solves them (rank-1 = 3).

    ``rank1_grades`` maps config_id -> {query_id: rank-1 consensus grade}.
    The verbatim family is the full_text configs; the distilled family is
    every other pure config. Best config per family is chosen by MRR
    (mean grade breaks ties).
    """
    verbatim_ids = [c for c in rank1_grades if c.startswith("full_text:")]
    distilled_ids = [c for c in rank1_grades
                     if c.split(":", 1)[0] in ("distill_core",) + tuple(PURE_MULTI_MODES)]
    if not verbatim_ids or not distilled_ids:
        raise MissingConfigsError(["full_text:* and distill_*:* configs required"])

    def solved(config_id: str) -> set[str]:
        return {q for q, g in rank1_grades[config_id].items() if g == 3}

    def best_of(ids: list[str]) -> str:
        return max(ids, key=lambda c: (metrics[c].mrr, metrics[c].mean_grade, c))

    best_v, best_d = best_of(verbatim_ids), best_of(distilled_ids)
    sv, sd = solved(best_v), solved(best_d)

    oracle_v = set().union(*(solved(c) for c in verbatim_ids))
    oracle_d = set().union(*(solved(c) for c in distilled_ids))
    all_qids = {q.query_id for q in queries}
    qtype = {q.query_id: q.query_type for q in queries}

    def type_counts(qids: set[str]) -> dict[str, int]:
        counts: dict[str, int] = {}
        for q in qids:
            t = qtype.get(q, "unknown")
            counts[t] = counts.get(t, 0) + 1
        return counts

    return CoverageReport(
        best_verbatim_config=best_v,
        best_distilled_config=best_d,
        best_verbatim_solved=len(sv),
        best_distilled_solved=len(sd),
        best_overlap=len(sv & sd),
        best_verbatim_only=len(sv - sd),
        best_distilled_only=len(sd - sv),
        oracle_verbatim_solved=len(oracle_v),
        oracle_distilled_solved=len(oracle_d),
        oracle_overlap=len(oracle_v & oracle_d),
        oracle_verbatim_only=len(oracle_v - oracle_d),
        oracle_distilled_only=len(oracle_d - oracle_v),
        oracle_union=len(oracle_v | oracle_d),
        oracle_neither=len(all_qids - (oracle_v | oracle_d)),
        n_verbatim_configs=len(verbatim_ids),
        n_distilled_configs=len(distilled_ids),
        exclusive_by_query_type={
            "oracle_distilled_only": type_counts(oracle_d - oracle_v),
            "oracle_verbatim_only": type_counts(oracle_v - oracle_d),
        },
        best_verbatim_only_queries=sorted(sv - sd),
        best_distilled_only_queries=sorted(sd - sv),
    )


# ---------------------------------------------------------------------------
# Vocabulary survival

@dataclass
class VocabSurvival:
    survival_rate: float
    query_retention: float
    core_mean_idf: float
    context_mean_idf: float
    idf_ratio: float
    top_k: int
    n_pairs: int


def vocab_survival(exchanges: Sequence[Exchange], objects: Sequence[DistilledObject],
                   queries: Sequence[Query], top_k: int = 10) -> VocabSurvival:
    """How much high-IDF verbatim vocabulary survives distillation.

    survival_rate averages, over paired exchanges, the fraction of the
    exchange's top-K IDF tokens present in its distilled text;
    query_retention averages the fraction of query tokens present
    anywhere in the distilled corpus; the field IDF means compare
    specific_context against exchange_core.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    ex_tokens = {ex.ref: tokenize_for_index(ex.text(), "okapi") for ex in exchanges}
    idf = idf_table(list(ex_tokens.values()))
    unseen = idf_of_unseen(len(ex_tokens))

    by_ref = {obj.ref: obj for obj in objects}
    rates = []
    for ex in exchanges:
        obj = by_ref.get(ex.ref)
        if obj is None:
            continue
        tokens = ex_tokens[ex.ref]
        if not tokens:
            continue
        first_pos: dict[str, int] = {}
        for i, t in enumerate(tokens):
            first_pos.setdefault(t, i)
        distinct = sorted(first_pos, key=lambda t: (-idf.get(t, 0.0), first_pos[t]))
        top = distinct[: min(top_k, len(distinct))]
        distilled = set(tokenize_for_index(obj.distill_text, "okapi"))
        rates.append(len(set(top) & distilled) / len(top))
    survival = sum(rates) / len(rates) if rates else 0.0

    distilled_vocab = set()
    for obj in objects:
        distilled_vocab.update(tokenize_for_index(obj.distill_text, "okapi"))
    retentions = []
    for q in queries:
        qtoks = set(tokenize_for_index(q.text, "okapi"))
        if qtoks:
            retentions.append(len(qtoks & distilled_vocab) / len(qtoks))
    retention = sum(retentions) / len(retentions) if retentions else 0.0

    def field_mean_idf(texts: list[str]) -> float:
        vals = [
            idf.get(t, unseen)
            for text in texts
            for t in tokenize_for_index(text, "okapi")
        ]
        return sum(vals) / len(vals) if vals else 0.0

    core_idf = field_mean_idf([o.exchange_core for o in objects])
    ctx_idf = field_mean_idf([o.specific_context for o in objects])
    return VocabSurvival(
        survival_rate=survival,
        query_retention=retention,
        core_mean_idf=core_idf,
        context_mean_idf=ctx_idf,
        idf_ratio=ctx_idf / core_idf if core_idf > 0 else 0.0,
        top_k=top_k,
        n_pairs=len(rates),
    )

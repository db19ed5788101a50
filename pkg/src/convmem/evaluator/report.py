"""Evaluation report: one self-contained document (JSON + rendered text).

Collects per-config metrics (sorted by MRR descending, then mean grade,
P@1, nDCG@10), the 40-row comparison table, the agreement matrix,
coverage venn counts, the query-type breakdown, vocabulary survival, and
best/failure-case extracts, together with every constant and seed that
produced them.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path
from typing import Mapping, Sequence

from .agreement import fleiss_from_votes, kappa_interpretation, pairwise_kappa_matrix
from .analysis import CoverageReport, VocabSurvival
from .metrics import MetricsRow
from .stats import ComparisonRow, bonferroni_alpha


def sort_metric_rows(rows: Sequence[MetricsRow]) -> list[MetricsRow]:
    return sorted(
        rows,
        key=lambda r: (-r.mrr, -r.mean_grade, -r.p_at_1, -r.ndcg_at_10, r.config_id),
    )


def best_case_extracts(per_query_means: Mapping[str, Mapping[str, float]],
                       query_types: Mapping[str, str], n: int = 5) -> dict:
    """Top-n distilled-advantage queries and bottom-n mean-grade queries.

    Advantage per query: best distilled per-query mean grade minus the
    same-mechanism Full Text baseline, maximized over mechanisms.
    """
    mechanisms = ("hnsw", "exact", "bm25_okapi", "bm25_fts")
    qids = sorted({q for m in per_query_means.values() for q in m})
    advantages = []
    for qid in qids:
        best = None
        for mech in mechanisms:
            baseline_id = f"full_text:{mech}:passthrough"
            if baseline_id not in per_query_means or qid not in per_query_means[baseline_id]:
                continue
            base = per_query_means[baseline_id][qid]
            for cid, means in per_query_means.items():
                mode = cid.split(":", 1)[0]
                if mode == "full_text" or f":{mech}:" not in cid or qid not in means:
                    continue
                diff = means[qid] - base
                if best is None or diff > best[0]:
                    best = (diff, cid, baseline_id, means[qid], base)
        if best is not None:
            advantages.append({
                "query_id": qid,
                "query_type": query_types.get(qid, "unknown"),
                "advantage": best[0],
                "distilled_config": best[1],
                "baseline_config": best[2],
                "distilled_mean": best[3],
                "verbatim_mean": best[4],
            })
    advantages.sort(key=lambda a: (-a["advantage"], a["query_id"]))

    overall = []
    for qid in qids:
        vals = [m[qid] for m in per_query_means.values() if qid in m]
        if vals:
            overall.append({
                "query_id": qid,
                "query_type": query_types.get(qid, "unknown"),
                "mean_grade_all_configs": sum(vals) / len(vals),
            })
    overall.sort(key=lambda a: (a["mean_grade_all_configs"], a["query_id"]))
    return {"top_distilled_advantage": advantages[:n], "hardest_queries": overall[:n]}


def build_report(metric_rows: Sequence[MetricsRow],
                 comparison_rows: Sequence[ComparisonRow],
                 grades_by_grader: Mapping[str, Mapping[str, int]],
                 votes_by_item: Mapping[str, Mapping[str, int]],
                 coverage: CoverageReport,
                 vocab: VocabSurvival,
                 identity_control_survival: float,
                 per_query_means: Mapping[str, Mapping[str, float]],
                 query_types: Mapping[str, str],
                 querytype_breakdown: Mapping[str, Mapping[str, float]],
                 corpus_stats: dict,
                 data_quality: dict,
                 run_config: dict,
                 n_graders: int = 5) -> dict:
    fleiss_k, fleiss_n = fleiss_from_votes(votes_by_item, n_graders)
    agreement = pairwise_kappa_matrix(grades_by_grader)
    agreement["fleiss_kappa"] = fleiss_k
    agreement["fleiss_interpretation"] = kappa_interpretation(fleiss_k)
    agreement["fleiss_n_items"] = fleiss_n

    rows_sorted = sort_metric_rows(metric_rows)
    report = {
        "run_config": dict(run_config),
        "corpus_stats": dict(corpus_stats),
        "metrics": [asdict(r) for r in rows_sorted],
        "comparisons": {
            "bonferroni_alpha": bonferroni_alpha(0.05, max(len(comparison_rows), 1)),
            "n_rows": len(comparison_rows),
            "rows": [asdict(r) for r in comparison_rows],
        },
        "agreement": agreement,
        "coverage": asdict(coverage),
        "query_type_breakdown": {k: dict(v) for k, v in querytype_breakdown.items()},
        "vocab_survival": {
            **asdict(vocab),
            "identity_control_survival_rate": identity_control_survival,
        },
        "cases": best_case_extracts(per_query_means, query_types),
        "data_quality": dict(data_quality),
    }
    return report


def _fmt_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    sep = "  ".join("-" * w for w in widths)
    return "\n".join([line(headers), sep] + [line(r) for r in rows])


def render_report(report: dict, top_n: int = 20) -> str:
    out = []
    cs = report["corpus_stats"]
    out.append("EVALUATION REPORT")
    out.append("=" * 70)
    out.append("")
    out.append("Corpus")
    out.append(f"  conversations={cs.get('n_conversations')}  exchanges={cs.get('n_exchanges')}"
               f"  distilled={cs.get('n_distilled')}")
    if cs.get("avg_verbatim_tokens"):
        out.append(
            f"  avg verbatim tokens={cs['avg_verbatim_tokens']:.1f}  "
            f"avg distilled tokens={cs['avg_distilled_tokens']:.1f}"
        )
        out.append(
            f"  compression from totals={cs['ratio_from_totals']:.2f}x  "
            f"per-item={cs['ratio_per_item']:.2f}x  (tokenizer={cs.get('tokenizer')})"
        )
    out.append("")
    out.append(f"Configurations ranked by MRR (top {top_n} of {len(report['metrics'])})")
    rows = [
        [m["config_id"], f"{m['mrr']:.4f}", f"{m['mean_grade']:.4f}",
         f"{m['p_at_1']:.4f}", f"{m['ndcg_at_10']:.4f}", str(m["n_queries"])]
        for m in report["metrics"][:top_n]
    ]
    out.append(_fmt_table(["config", "MRR", "mean_grade", "P@1", "nDCG@10", "n"], rows))
    out.append("")
    comp = report["comparisons"]
    out.append(f"Pure-mode comparisons ({comp['n_rows']} rows, "
               f"Bonferroni alpha = {comp['bonferroni_alpha']:.5f})")
    rows = [
        [r["mechanism"], r["mode"], r["fusion"], f"{r['delta_mean_grade']:+.3f}",
         f"{r['t_stat']:.2f}", f"{r['p_value_t']:.2e}", f"{r['p_value_wilcoxon']:.2e}",
         f"{r['cohens_dz']:+.2f}", "***" if r["significant_bonferroni"] else ""]
        for r in comp["rows"]
    ]
    out.append(_fmt_table(
        ["mech", "mode", "fusion", "delta", "t", "p_t", "p_wilcoxon", "d_z", "sig"], rows))
    out.append("")
    ag = report["agreement"]
    out.append("Inter-rater agreement")
    out.append(f"  Fleiss kappa = {ag['fleiss_kappa']:.3f} ({ag['fleiss_interpretation']}) "
               f"over {ag['fleiss_n_items']} items rated by all graders")
    if "best_pair" in ag:
        bp, wp = ag["best_pair"], ag["worst_pair"]
        out.append(f"  best pair  {bp['graders'][0]} / {bp['graders'][1]}: "
                   f"{bp['kappa']:.3f} ({bp['interpretation']})")
        out.append(f"  worst pair {wp['graders'][0]} / {wp['graders'][1]}: "
                   f"{wp['kappa']:.3f} ({wp['interpretation']})")
    out.append("")
    cov = report["coverage"]
    out.append("Coverage (P@1 grade-3 query sets)")
    out.append(f"  best verbatim  {cov['best_verbatim_config']}: {cov['best_verbatim_solved']}")
    out.append(f"  best distilled {cov['best_distilled_config']}: {cov['best_distilled_solved']}")
    out.append(f"  overlap={cov['best_overlap']}  verbatim-only={cov['best_verbatim_only']}"
               f"  distilled-only={cov['best_distilled_only']}")
    out.append(f"  oracle union={cov['oracle_union']}  neither={cov['oracle_neither']}"
               f"  (configs: {cov['n_verbatim_configs']} verbatim, "
               f"{cov['n_distilled_configs']} distilled)")
    out.append("")
    vs = report["vocab_survival"]
    out.append("Vocabulary survival")
    out.append(f"  top-{vs['top_k']} IDF survival rate = {vs['survival_rate']:.3f} "
               f"over {vs['n_pairs']} pairs (identity control = "
               f"{vs['identity_control_survival_rate']:.3f})")
    out.append(f"  query token retention = {vs['query_retention']:.3f}")
    out.append(f"  mean IDF: specific_context={vs['context_mean_idf']:.3f} "
               f"exchange_core={vs['core_mean_idf']:.3f} "
               f"ratio={vs['idf_ratio']:.2f}x")
    out.append("")
    dq = report["data_quality"]
    out.append("Data quality")
    for key in sorted(dq):
        out.append(f"  {key} = {dq[key]}")
    out.append("")
    cases = report["cases"]
    out.append("Top distilled-advantage queries")
    for c in cases["top_distilled_advantage"]:
        out.append(f"  {c['query_id']} ({c['query_type']}): +{c['advantage']:.3f} "
                   f"via {c['distilled_config']} "
                   f"({c['distilled_mean']:.2f} vs {c['verbatim_mean']:.2f})")
    out.append("")
    out.append("Hardest queries (mean grade across all configs)")
    for c in cases["hardest_queries"]:
        out.append(f"  {c['query_id']} ({c['query_type']}): "
                   f"{c['mean_grade_all_configs']:.3f}")
    out.append("")
    return "\n".join(out)


def write_report(report: dict, out_dir: str | Path) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / "report.json"
    text_path = out_dir / "report.txt"
    json_path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n",
                         encoding="utf-8")
    text_path.write_text(render_report(report) + "\n", encoding="utf-8")
    return json_path, text_path

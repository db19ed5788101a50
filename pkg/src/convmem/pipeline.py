"""Batch pipeline steps over one store directory.

Each step reads and writes only the documented stores:

    corpus.jsonl      raw messages            (synth / external)
    queries.jsonl     evaluation queries      (synth / curated)
    exchanges.jsonl   segmented exchanges     (ingest)
    objects.jsonl     distilled objects       (distill)
    skiplist.jsonl    undistillable exchanges (distill)
    indexes/          persisted vector stores (index)
    runs.tsv (+ .provenance.jsonl)  sweep output
    grades.jsonl      per-grader votes        (grade)
    consensus.jsonl   consensus grades        (consensus)
    report/           final report            (report)

A lock file guards the store directory: batch commands are
single-instance.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

from . import corpus as corpus_mod
from . import distiller as distiller_mod
from .config import PipelineConfig
from .evaluator import (
    UngradeableError,
    build_report,
    compute_metrics,
    comparison_suite,
    consensus as make_consensus,
    coverage_partition,
    grade_pairs,
    make_mock_graders,
    per_query_mean_grades,
    vocab_survival,
    write_report,
)
from .evaluator.consensus import ConsensusGrade
from .evaluator.grading import (
    GradeRecord,
    MockGrader,
    append_grades,
    build_grading_prompt,
    parse_grade,
    read_grades,
)
from .evaluator.queries import read_queries, write_queries
from .indexer.embeddings import HashEmbeddingProvider, get_embedding_provider
from .indexer.vectors import load_vector_store, save_vector_store
from .providers import CommandProvider, HttpProvider
from .searcher import (
    RankedList,
    SearchEngine,
    config_by_id,
    enumerate_configs,
    read_run_file,
    rerank_bm25_snippet,
    write_run_file,
)
from .synth import generate_corpus
from .tokenizers import get_tokenizer

VIEWS = ("verbatim", "dcore", "dfiles", "drooms")


class StoreLockedError(RuntimeError):
    pass


@contextmanager
def store_lock(store_dir: Path):
    store_dir.mkdir(parents=True, exist_ok=True)
    lock = store_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StoreLockedError(
            f"store {store_dir} is locked by another command (remove {lock} if stale)"
        ) from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _paths(cfg: PipelineConfig) -> dict[str, Path]:
    root = Path(cfg.store_dir)
    return {
        "root": root,
        "corpus": root / "corpus.jsonl",
        "queries": root / "queries.jsonl",
        "exchanges": root / "exchanges.jsonl",
        "objects": root / "objects.jsonl",
        "skiplist": root / "skiplist.jsonl",
        "indexes": root / "indexes",
        "runs": root / "runs.tsv",
        "runs_sidecar": root / "runs.provenance.jsonl",
        "grades": root / "grades.jsonl",
        "consensus": root / "consensus.jsonl",
        "report": root / "report",
    }


def _distill_provider(cfg: PipelineConfig):
    # the environment can override the configured command without touching
    # the config file
    env_cmd = os.environ.get("CONVMEM_DISTILL_CMD")
    spec = f"cmd:{env_cmd}" if env_cmd else cfg.distill_provider
    if spec == "fallback":
        return None
    if spec.startswith("cmd:"):
        return CommandProvider(spec[4:])
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpProvider(spec)
    raise ValueError(f"unknown distill provider: {spec!r}")


def _graders(cfg: PipelineConfig) -> list:
    out = []
    for spec in cfg.graders:
        if spec.startswith("mock:"):
            arg = spec[5:]
            if arg.isdigit():
                out.extend(make_mock_graders(int(arg)))
            else:
                out.append(MockGrader(arg))
        elif spec.startswith("cmd:"):
            out.append(CommandProvider(spec[4:]))
        elif spec.startswith("http"):
            out.append(HttpProvider(spec, params={"temperature": 0}))
        else:
            raise ValueError(f"unknown grader spec: {spec!r}")
    return out


def _escalator_provider(cfg: PipelineConfig):
    spec = cfg.escalator
    if not spec:
        return None
    if spec.startswith("mock:"):
        return MockGrader(spec[5:], strictness=-0.05)
    if spec.startswith("cmd:"):
        return CommandProvider(spec[4:])
    if spec.startswith("http"):
        return HttpProvider(spec)
    raise ValueError(f"unknown escalator spec: {spec!r}")


def _embedder(cfg: PipelineConfig):
    if cfg.embedder == "hash":
        return HashEmbeddingProvider(cfg.embedding_dim)
    return get_embedding_provider(cfg.embedder, cfg.embedding_dim)


def load_engine(cfg: PipelineConfig) -> SearchEngine:
    paths = _paths(cfg)
    exchanges = corpus_mod.read_exchanges(paths["exchanges"])
    objects = distiller_mod.read_objects(paths["objects"])
    engine = SearchEngine(
        exchanges, objects, _embedder(cfg), k=cfg.k, rrf_k=cfg.rrf_k,
        candidate_depth=cfg.candidate_depth,
        hnsw_params={
            "m": cfg.hnsw_m,
            "ef_construction": cfg.hnsw_ef_construction,
            "ef_search": cfg.hnsw_ef_search,
            "seed": cfg.hnsw_seed,
        },
    )
    idx_dir = paths["indexes"]
    if idx_dir.is_dir():
        for view in VIEWS:
            path = idx_dir / f"{view}.palvec"
            if path.exists():
                engine._exact_cache[view] = load_vector_store(path, kind="exact")
                if view == "verbatim":
                    engine._chunk_refs = [
                        i.split("::chunk")[0] for i in engine._exact_cache[view].ids
                    ]
    return engine


# ---------------------------------------------------------------------------
# Steps

def step_synth(cfg: PipelineConfig, n_exchanges: int = 1000, n_queries: int = 50,
               seed: int | None = None) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        seed = cfg.seed if seed is None else seed
        synth = generate_corpus(n_exchanges=n_exchanges, n_queries=n_queries, seed=seed)
        with open(paths["corpus"], "w", encoding="utf-8", newline="\n") as fh:
            for m in synth.messages:
                rec = {
                    "conversation_id": m.conversation_id,
                    "project_id": m.project_id,
                    "ply_index": m.ply_index,
                    "role": m.role,
                    "text": m.text,
                    "is_tool_only": m.is_tool_only,
                }
                if m.timestamp:
                    rec["timestamp"] = m.timestamp
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
        write_queries(synth.queries, paths["queries"])
        (paths["root"] / "synth_meta.json").write_text(json.dumps({
            "seed": seed,
            "n_conversations": synth.n_conversations,
            "n_exchanges": synth.n_exchanges,
            "exchange_refs": synth.exchange_refs,
        }) + "\n", encoding="utf-8")
    return {"n_messages": len(synth.messages), "n_exchanges": synth.n_exchanges,
            "n_queries": len(synth.queries), "n_conversations": synth.n_conversations}


def step_ingest(cfg: PipelineConfig, in_path: str | Path | None = None) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        src = Path(in_path) if in_path else paths["corpus"]
        messages = corpus_mod.read_messages(src)
        seg_cfg = corpus_mod.SegmentConfig(min_chars=cfg.min_chars, max_plies=cfg.max_plies)
        exchanges = corpus_mod.segment_corpus(messages, seg_cfg)
        tokenizer = get_tokenizer(cfg.tokenizer)
        corpus_mod.attach_token_lengths(exchanges, tokenizer)
        corpus_mod.write_exchanges(exchanges, paths["exchanges"])
    return {
        "n_messages": len(messages),
        "n_exchanges": len(exchanges),
        "n_conversations": len({ex.conversation_id for ex in exchanges}),
        "tokenizer": tokenizer.name,
    }


def step_distill(cfg: PipelineConfig) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        exchanges = corpus_mod.read_exchanges(paths["exchanges"])
        provider = _distill_provider(cfg)
        dcfg = distiller_mod.DistillConfig(
            truncate_chars=cfg.distill_truncate_chars,
            attempts=cfg.distill_attempts,
            workers=cfg.distill_workers,
        )
        tokenizer = get_tokenizer(cfg.tokenizer)
        objects, skips = distiller_mod.distill_corpus(
            exchanges, provider, dcfg, tokenizer)
        distiller_mod.write_objects(objects, paths["objects"])
        distiller_mod.write_skiplist(skips, paths["skiplist"])
    return {"n_objects": len(objects), "n_skipped": len(skips),
            "provider": cfg.distill_provider}


def step_index(cfg: PipelineConfig) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        engine = load_engine(cfg)
        paths["indexes"].mkdir(parents=True, exist_ok=True)
        counts = {}
        for view in VIEWS:
            index = engine._exact(view)
            save_vector_store(paths["indexes"] / f"{view}.palvec", index)
            counts[view] = index.count
    return {"views": counts, "dimension": engine.embedder.dimension}


def step_search(cfg: PipelineConfig, config_id: str, query: str,
                rerank: bool = False, lam: float | None = None) -> RankedList:
    engine = load_engine(cfg)
    config = config_by_id(config_id, k=cfg.k)
    result = engine.run(config, query)
    if rerank:
        result = rerank_bm25_snippet(
            result, query, engine.verbatim_texts,
            cfg.rerank_lambda if lam is None else lam,
            cfg.snippet_truncate_chars,
        )
    return result


def step_sweep(cfg: PipelineConfig, space: str = "evaluated",
               queries_path: str | Path | None = None) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        engine = load_engine(cfg)
        queries = read_queries(Path(queries_path) if queries_path else paths["queries"])
        configs = enumerate_configs(space, k=cfg.k)
        results = []
        for config in configs:
            for q in queries:
                results.append(engine.run(config, q.text, q.query_id))
        write_run_file(results, paths["runs"], paths["runs_sidecar"])
    return {"n_configs": len(configs), "n_queries": len(queries),
            "n_results": sum(len(r.entries) for r in results)}


def _snippet_for(config_id: str, ref: str, engine: SearchEngine,
                 truncate_chars: int) -> tuple[str, int | None]:
    """Grading snippet and its truncation: pure distilled modes grade the
    distilled text untruncated, everything else grades the verbatim
    snippet at the display truncation."""
    mode = config_id.split(":", 1)[0]
    if mode.startswith("distill") and ref in engine.objects:
        return engine.objects[ref].distill_text, None
    return engine.verbatim_texts[ref], truncate_chars


def step_grade(cfg: PipelineConfig) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        engine = load_engine(cfg)
        runs = read_run_file(paths["runs"])
        queries = {q.query_id: q for q in read_queries(paths["queries"])}
        graders = _graders(cfg)

        items, seen = [], set()
        for (qid, config_id), entries in sorted(runs.items()):
            for ref, _ in entries:
                key = (qid, config_id, ref)
                if key in seen:
                    continue
                seen.add(key)
                snippet, trunc = _snippet_for(config_id, ref, engine,
                                              cfg.snippet_truncate_chars)
                items.append({
                    "query_id": qid,
                    "config_id": config_id,
                    "exchange_ref": ref,
                    "query": queries[qid].text,
                    "snippet": snippet,
                    "truncate_chars": trunc,
                })
        # the grade store is append-only: a rerun resumes, never rewrites
        done = set()
        if paths["grades"].exists():
            done = {(r.query_id, r.config_id, r.exchange_ref, r.grader_id)
                    for r in read_grades(paths["grades"])}
        # memoize on (grader, query, snippet): the same pair under many
        # configs is graded once and recorded per config
        memo: dict[tuple, tuple] = {}
        records = []
        for item in items:
            for grader in graders:
                rkey = (item["query_id"], item["config_id"], item["exchange_ref"],
                        grader.name)
                if rkey in done:
                    continue
                mkey = (grader.name, item["query_id"], item["snippet"], item["truncate_chars"])
                if mkey in memo:
                    grade, reason, failed = memo[mkey]
                else:
                    rec = grade_pairs([grader], [item], workers=1)[0]
                    grade, reason, failed = rec.grade, rec.reason, rec.parse_failed
                    memo[mkey] = (grade, reason, failed)
                records.append(GradeRecord(
                    item["query_id"], item["config_id"], item["exchange_ref"],
                    grader.name, grade, reason, failed))
        append_grades(records, paths["grades"])
    return {
        "n_pairs": len(items),
        "n_records": len(records),
        "n_already_graded": len(done),
        "n_parse_failed": sum(1 for r in records if r.parse_failed),
        "graders": [g.name for g in graders],
    }


def step_consensus(cfg: PipelineConfig) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        engine = load_engine(cfg)
        queries = {q.query_id: q for q in read_queries(paths["queries"])}
        records = read_grades(paths["grades"])
        escalator = _escalator_provider(cfg)

        by_pair: dict[tuple, list] = {}
        for r in records:
            by_pair.setdefault((r.query_id, r.config_id, r.exchange_ref), []).append(r)

        rows: list[ConsensusGrade] = []
        ungradeable = 0
        esc_memo: dict[tuple, int | None] = {}

        class _EscalatorFailed(RuntimeError):
            pass

        for (qid, config_id, ref), recs in sorted(by_pair.items()):
            votes = [r.grade for r in recs if not r.parse_failed]
            esc_fn = None
            if escalator is not None:
                snippet, trunc = _snippet_for(config_id, ref, engine,
                                              cfg.snippet_truncate_chars)

                def esc_fn(qid=qid, snippet=snippet, trunc=trunc):
                    mkey = (qid, snippet, trunc)
                    if mkey not in esc_memo:
                        prompt = build_grading_prompt(
                            queries[qid].text, snippet, trunc, escalator=True)
                        grade, _, failed = parse_grade(escalator.complete(prompt))
                        esc_memo[mkey] = None if failed else grade
                    vote = esc_memo[mkey]
                    if vote is None:
                        raise _EscalatorFailed()
                    return vote

            try:
                rows.append(make_consensus(qid, config_id, ref, votes, esc_fn))
            except UngradeableError:
                ungradeable += 1
            except _EscalatorFailed:
                # 6th vote unobtainable: recount over the valid votes only
                rows.append(make_consensus(qid, config_id, ref, votes, None))
        with open(paths["consensus"], "w", encoding="utf-8", newline="\n") as fh:
            for c in rows:
                fh.write(json.dumps({
                    "query_id": c.query_id,
                    "config_id": c.config_id,
                    "exchange_ref": c.exchange_ref,
                    "grade": c.grade,
                    "tier": c.tier,
                    "votes": {str(k): v for k, v in c.votes.items()},
                    "escalation_vote": c.escalation_vote,
                }, ensure_ascii=False) + "\n")
    tiers = Counter(c.tier for c in rows)
    return {"n_consensus": len(rows), "n_ungradeable": ungradeable,
            "tiers": dict(tiers)}


def read_consensus(path: str | Path) -> list[ConsensusGrade]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rows.append(ConsensusGrade(
                query_id=rec["query_id"],
                config_id=rec["config_id"],
                exchange_ref=rec["exchange_ref"],
                grade=rec["grade"],
                tier=rec["tier"],
                votes={int(k): v for k, v in rec["votes"].items()},
                escalation_vote=rec.get("escalation_vote"),
            ))
    return rows


def step_report(cfg: PipelineConfig) -> dict:
    paths = _paths(cfg)
    with store_lock(paths["root"]):
        exchanges = corpus_mod.read_exchanges(paths["exchanges"])
        objects = distiller_mod.read_objects(paths["objects"])
        queries = read_queries(paths["queries"])
        runs = read_run_file(paths["runs"])
        consensus_rows = read_consensus(paths["consensus"])
        grade_records = read_grades(paths["grades"])

        grade_of = {(c.query_id, c.config_id, c.exchange_ref): c.grade
                    for c in consensus_rows}
        config_ids = sorted({cid for _, cid in runs})
        qids = sorted({q.query_id for q in queries})

        grades_by_query: dict[str, dict[str, list[int]]] = {c: {} for c in config_ids}
        for cid in config_ids:
            for qid in qids:
                entries = runs.get((qid, cid), [])
                grades_by_query[cid][qid] = [
                    grade_of[(qid, cid, ref)]
                    for ref, _ in entries if (qid, cid, ref) in grade_of
                ]
        metric_rows = [
            compute_metrics(cid, grades_by_query[cid], strict=cfg.strict_metrics)
            for cid in config_ids
        ]
        metrics_by_id = {m.config_id: m for m in metric_rows}
        per_query_means = {
            cid: per_query_mean_grades(grades_by_query[cid]) for cid in config_ids
        }
        comparison_rows = comparison_suite(
            per_query_means, n_resamples=cfg.bootstrap_resamples, seed=cfg.seed)

        grades_by_grader: dict[str, dict[str, int]] = {}
        votes_by_item: dict[str, dict[str, int]] = {}
        for r in grade_records:
            if r.parse_failed:
                continue
            item = f"{r.query_id}|{r.config_id}|{r.exchange_ref}"
            grades_by_grader.setdefault(r.grader_id, {})[item] = r.grade
            votes_by_item.setdefault(item, {})[r.grader_id] = r.grade
        n_graders = len(grades_by_grader)

        rank1: dict[str, dict[str, int]] = {}
        planted: dict[str, dict[str, float]] = {}
        targets = {q.query_id: q.target_ref for q in queries if q.target_ref}
        qtype = {q.query_id: q.query_type for q in queries}
        for cid in config_ids:
            rank1[cid] = {}
            hit_counts: dict[str, list[int]] = {}
            for qid in qids:
                entries = runs.get((qid, cid), [])
                if entries:
                    ref = entries[0][0]
                    rank1[cid][qid] = grade_of.get((qid, cid, ref), 0)
                    if qid in targets:
                        hit_counts.setdefault(qtype[qid], []).append(
                            1 if ref == targets[qid] else 0)
                else:
                    rank1[cid][qid] = 0
            if targets:
                planted[cid] = {
                    t: sum(v) / len(v) for t, v in sorted(hit_counts.items())
                }
        coverage = coverage_partition(rank1, metrics_by_id, queries)

        vocab = vocab_survival(exchanges, objects, queries, top_k=cfg.vocab_top_k)
        control_objects = [
            distiller_mod.DistilledObject(
                exchange_core=ex.text(),
                specific_context="",
                room_assignments=[distiller_mod.RoomAssignment.make(
                    "concept", "identity", "identity", 1.0, ex.project_id)],
                files_touched=[],
                conversation_id=ex.conversation_id,
                ply_start=ex.ply_start,
                ply_end=ex.ply_end,
                project_id=ex.project_id,
            )
            for ex in exchanges
        ]
        identity_control = vocab_survival(
            exchanges, control_objects, queries, top_k=cfg.vocab_top_k).survival_rate

        tokenizer = get_tokenizer(cfg.tokenizer)
        stats = corpus_mod.compute_corpus_stats(exchanges, objects, tokenizer)

        querytype_breakdown: dict[str, dict[str, float]] = {}
        for cid in config_ids:
            by_type: dict[str, list[float]] = {}
            for qid in qids:
                gs = grades_by_query[cid][qid]
                if gs:
                    by_type.setdefault(qtype[qid], []).append(sum(gs) / len(gs))
            querytype_breakdown[cid] = {
                t: sum(v) / len(v) for t, v in sorted(by_type.items())
            }

        empty_result_queries = {
            cid: sum(1 for qid in qids if not runs.get((qid, cid)))
            for cid in config_ids
        }
        tier_hist = Counter(c.tier for c in consensus_rows)
        data_quality = {
            "grade_records": len(grade_records),
            "parse_failed": sum(1 for r in grade_records if r.parse_failed),
            "parse_failed_rate": round(
                sum(1 for r in grade_records if r.parse_failed) / max(len(grade_records), 1), 5),
            "consensus_pairs": len(consensus_rows),
            "tier_unanimous": tier_hist.get("unanimous", 0),
            "tier_strong": tier_hist.get("strong", 0),
            "tier_weak": tier_hist.get("weak", 0),
            "tier_escalated": tier_hist.get("escalated", 0),
            "queries_with_empty_results_max": max(empty_result_queries.values(), default=0),
        }

        report = build_report(
            metric_rows=metric_rows,
            comparison_rows=comparison_rows,
            grades_by_grader=grades_by_grader,
            votes_by_item=votes_by_item,
            coverage=coverage,
            vocab=vocab,
            identity_control_survival=identity_control,
            per_query_means=per_query_means,
            query_types=qtype,
            querytype_breakdown=querytype_breakdown,
            corpus_stats=asdict(stats),
            data_quality=data_quality,
            run_config=cfg.to_dict(),
            n_graders=max(n_graders, 2),
        )
        if planted:
            report["planted_target_p_at_1"] = planted
        json_path, text_path = write_report(report, paths["report"])
    return {"report_json": str(json_path), "report_txt": str(text_path),
            "n_metric_rows": len(metric_rows),
            "n_comparison_rows": len(comparison_rows)}

#!/usr/bin/env python3
"""Walkthrough: the two text layers, four mechanisms, and layer separation.

Both layers are indexed independently: BM25 (plain and stemmed variants)
over the text, and unit-normalized vectors (exact and HNSW) over hash
embeddings. Search configs name a mode, a mechanism, and a fusion.
"""

from convmem.corpus import SegmentConfig, segment_corpus
from convmem.distiller import distill_corpus
from convmem.searcher import SearchEngine, config_by_id, enumerate_configs
from convmem.synth import generate_corpus

synth = generate_corpus(n_exchanges=200, n_queries=20, seed=2)
exchanges = segment_corpus(synth.messages, SegmentConfig())
objects, _ = distill_corpus(exchanges)
engine = SearchEngine(exchanges, objects, k=5)

spaces = {s: len(enumerate_configs(s)) for s in ("pure", "cross", "hybrid", "evaluated")}
print("config space:", spaces)

# Pick a query whose target we know by construction.
query = next(q for q in synth.queries if q.query_type == "exact_term")
print(f"\nquery: {query.text!r} (target {query.target_ref})")

for cid in (
    "full_text:bm25_okapi:passthrough",   # keyword on verbatim
    "full_text:exact:passthrough",        # brute-force cosine on verbatim
    "distill_core:bm25_fts:passthrough",  # stemmed keyword on distilled
    "distill_all:hnsw:rrf",               # fused facet views of the objects
    "cross_bm25v_hnswd:bm25_okapi+hnsw:w80",  # cross-layer fusion
):
    result = engine.run(config_by_id(cid, k=5), query.text, query.query_id)
    top = result.entries[0] if result.entries else None
    hit = "HIT " if top and top.ref == query.target_ref else "miss"
    label = f"{top.ref} @ {top.score:.3f}" if top else "(empty)"
    print(f"  {hit} {cid:42s} -> {label}")

# Layer separation is enforced: a distilled-layer signal cannot run
# against a verbatim-layer view.
try:
    engine._check_layer("verbatim", "distilled")
except Exception as exc:
    print(f"\nlayer mixing rejected: {exc}")

#!/usr/bin/env python3
"""Walkthrough: rank-fusion strategies and the post-hoc snippet reranker.

Fusion consumes per-signal ranked lists. RRF uses ranks only; the score
strategies min-max normalize each list first. The reranker blends a
candidate list against BM25 over the candidates' verbatim snippets.
"""

from convmem.searcher import RankedEntry, RankedList, fuse, gate_features, rerank_bm25_snippet

keyword = [("exchA", 12.1), ("exchB", 7.5), ("exchC", 2.2)]
vector = [("exchB", 0.91), ("exchD", 0.88), ("exchA", 0.70)]

print("keyword list:", keyword)
print("vector  list:", vector)
for strategy in ("rrf", "combmnz", "max", "additive", "w80"):
    fused = fuse([keyword, vector], strategy)
    print(f"  {strategy:8s} -> " + "  ".join(f"{r}:{s:.3f}" for r, s in fused))

# RRF ignores score magnitudes entirely:
scaled = [(r, s * 1000) for r, s in keyword]
assert fuse([keyword, vector], "rrf") == fuse([scaled, vector], "rrf")
print("\nRRF is rank-only: scaling every keyword score by 1000 changes nothing")

# The reranker: rank-2's snippet carries the query terms, rank-1's does not.
candidates = RankedList("q", "distill_core:hnsw:passthrough", [
    RankedEntry("exchA", 0.90, 1),
    RankedEntry("exchB", 0.88, 2),
    RankedEntry("exchC", 0.70, 3),
], {})
snippets = {
    "exchA": "long discussion about something unrelated",
    "exchB": "we raised the connection pool timeout to thirty seconds",
    "exchC": "notes from the standup",
}
for lam in (1.0, 0.7, 0.0):
    out = rerank_bm25_snippet(candidates, "connection pool timeout", snippets, lam=lam)
    print(f"lambda={lam}: " + " > ".join(out.refs()))

feats = gate_features("connection pool timeout", candidates, snippets)
print("gate features for the ungated list:",
      {k: round(v, 3) for k, v in feats.items()})

"""Okapi BM25 over an in-memory inverted index.

The index is rebuilt lazily in memory from the document store; there is no
on-disk postings format. Two variants share the scorer and differ only in
the analyzer: ``okapi`` (plain) and ``fts`` (stopworded + stemmed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .analysis import tokenize_for_index


class UnknownDocError(KeyError):
    pass


@dataclass
class Bm25Index:
    variant: str = "okapi"
    k1: float = 1.5
    b: float = 0.75
    doc_count: int = 0
    avg_doc_len: float = 0.0
    doc_lens: list[int] = field(default_factory=list)
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    idf: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.k1 <= 0:
            raise ValueError("k1 must be > 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")
        if self.variant not in ("okapi", "fts"):
            raise ValueError(f"unknown BM25 variant: {self.variant!r}")


def build_bm25(docs: Sequence[str], variant: str = "okapi", k1: float = 1.5, b: float = 0.75) -> Bm25Index:
    index = Bm25Index(variant=variant, k1=k1, b=b)
    index.doc_count = len(docs)
    tf_maps = []
    for doc_id, text in enumerate(docs):
        terms = tokenize_for_index(text, variant)
        index.doc_lens.append(len(terms))
        tf: dict[str, int] = {}
        for t in terms:
            tf[t] = tf.get(t, 0) + 1
        tf_maps.append(tf)
    index.avg_doc_len = (
        sum(index.doc_lens) / index.doc_count if index.doc_count else 0.0
    )
    for doc_id, tf in enumerate(tf_maps):
        for term, freq in tf.items():
            index.postings.setdefault(term, []).append((doc_id, freq))
    n = index.doc_count
    index.idf = {
        t: math.log((n - len(plist) + 0.5) / (len(plist) + 0.5) + 1.0)
        for t, plist in index.postings.items()
    }
    return index


def bm25_score(query_terms: Sequence[str], doc_id: int, index: Bm25Index) -> float:
    """Okapi BM25 for one document; duplicated query terms contribute twice."""
    if not 0 <= doc_id < index.doc_count:
        raise UnknownDocError(doc_id)
    dl = index.doc_lens[doc_id]
    rel_len = dl / index.avg_doc_len if index.avg_doc_len > 0 else 0.0
    score = 0.0
    for term in query_terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        tf = 0
        for d, f in plist:
            if d == doc_id:
                tf = f
                break
        if tf == 0:
            continue
        denom = tf + index.k1 * (1.0 - index.b + index.b * rel_len)
        score += index.idf[term] * tf * (index.k1 + 1.0) / denom
    return score


def bm25_search(query: str, index: Bm25Index, k: int) -> list[tuple[int, float]]:
    """Top-k (doc_id, score), score-descending, ties by ascending doc_id.

    Zero-scoring documents are excluded, so a query that matches nothing
    returns an empty list.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = tokenize_for_index(query, index.variant)
    scores: dict[int, float] = {}
    for term in terms:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf[term]
        for doc_id, tf in plist:
            dl = index.doc_lens[doc_id]
            rel_len = dl / index.avg_doc_len if index.avg_doc_len > 0 else 0.0
            denom = tf + index.k1 * (1.0 - index.b + index.b * rel_len)
            scores[doc_id] = scores.get(doc_id, 0.0) + idf * tf * (index.k1 + 1.0) / denom
    hits = [(d, s) for d, s in scores.items() if s > 0.0]
    hits.sort(key=lambda ds: (-ds[1], ds[0]))
    return hits[:k]

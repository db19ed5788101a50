import math
import random

import pytest

from convmem.indexer.analysis import tokenize_for_index
from convmem.indexer.bm25 import UnknownDocError, bm25_score, bm25_search, build_bm25


def oracle_bm25(query_terms, doc_terms_list, doc_id, k1=1.5, b=0.75):
    """Definitional Okapi BM25, written independently of the index code."""
    n = len(doc_terms_list)
    doc = doc_terms_list[doc_id]
    dl = len(doc)
    avgdl = sum(len(d) for d in doc_terms_list) / n if n else 0.0
    score = 0.0
    for term in query_terms:
        df = sum(1 for d in doc_terms_list if term in d)
        if df == 0:
            continue
        tf = doc.count(term)
        if tf == 0:
            continue
        idf = math.log((n - df + 0.5) / (df + 0.5) + 1.0)
        rel = dl / avgdl if avgdl > 0 else 0.0
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * rel))
    return score


class TestBm25Score:
    def test_no_overlap_is_zero(self):
        index = build_bm25(["alpha beta", "gamma"])
        assert bm25_score(["zeta"], 0, index) == 0.0

    def test_two_doc_oracle(self):
        docs = ["a b", "c"]
        index = build_bm25(docs, k1=1.5, b=0.75)
        expected = oracle_bm25(["a"], [["a", "b"], ["c"]], 0)
        assert bm25_score(["a"], 0, index) == pytest.approx(expected, abs=1e-12)

    def test_tf_saturation(self):
        scores = []
        for tf in (1, 2, 3, 4):
            docs = [" ".join(["term"] * tf) + " pad", "other doc entirely here"]
            index = build_bm25(docs)
            scores.append(bm25_score(["term"], 0, index))
        assert scores == sorted(scores)
        increments = [b - a for a, b in zip(scores, scores[1:])]
        assert all(y < x for x, y in zip(increments, increments[1:]))

    def test_unknown_doc_id(self):
        index = build_bm25(["a"])
        with pytest.raises(UnknownDocError):
            bm25_score(["a"], 5, index)

    def test_duplicate_query_terms_add(self):
        index = build_bm25(["a b", "c"])
        assert bm25_score(["a", "a"], 0, index) == pytest.approx(
            2 * bm25_score(["a"], 0, index))

    def test_param_validation(self):
        with pytest.raises(ValueError):
            build_bm25(["a"], k1=0.0)
        with pytest.raises(ValueError):
            build_bm25(["a"], b=1.5)


class TestBm25Search:
    def test_query_matching_nothing_returns_empty(self):
        index = build_bm25(["alpha beta", "gamma delta"])
        assert bm25_search("zeta theta", index, 5) == []

    def test_k_larger_than_matches(self):
        index = build_bm25(["alpha", "alpha", "beta"])
        hits = bm25_search("alpha", index, 10)
        assert len(hits) == 2

    def test_tie_break_by_doc_id(self):
        docs = ["pad x", "shared y", "pad z", "pad w", "pad v", "shared y"]
        index = build_bm25(docs)
        hits = bm25_search("shared", index, 5)
        assert [d for d, _ in hits] == [1, 5]
        assert hits[0][1] == pytest.approx(hits[1][1])

    def test_random_corpora_match_oracle(self):
        rng = random.Random(99)
        vocab = [f"t{i}" for i in range(8)]
        for trial in range(100):
            n_docs = rng.randint(1, 10)
            doc_terms = [
                [rng.choice(vocab) for _ in range(rng.randint(0, 12))]
                for _ in range(n_docs)
            ]
            docs = [" ".join(d) for d in doc_terms]
            index = build_bm25(docs)
            query_terms = [rng.choice(vocab) for _ in range(rng.randint(1, 4))]
            for doc_id in range(n_docs):
                expected = oracle_bm25(query_terms, doc_terms, doc_id)
                got = bm25_score(query_terms, doc_id, index)
                assert got == pytest.approx(expected, abs=1e-9), (trial, doc_id)

    def test_fts_variant_stems_query_and_docs(self):
        index = build_bm25(["connection pools timeout", "unrelated text"], variant="fts")
        hits = bm25_search("connections pooling", index, 5)
        assert [d for d, _ in hits] == [0]

    def test_search_scores_match_score_fn(self):
        docs = ["alpha beta gamma", "alpha alpha", "beta gamma delta"]
        index = build_bm25(docs)
        for doc_id, score in bm25_search("alpha beta", index, 10):
            terms = tokenize_for_index("alpha beta", "okapi")
            assert score == pytest.approx(bm25_score(terms, doc_id, index), abs=1e-12)

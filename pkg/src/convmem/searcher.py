"""Search configuration space, execution, rank fusion, and reranking.

Three config families:

* pure        -- one retrieval mechanism on one text layer;
* cross_layer -- two (or three) signals on *different* layers, fused;
* hybrid      -- keyword + vector on the *same* layer, fused.

A config is (mode, mechanism, fusion, k) and its id is
``mode:mechanism:fusion``. Counts are exact: 44 pure, 74 cross-layer,
56 hybrid; the evaluated space is pure + cross-layer = 118.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Exchange
from .distiller import DistilledObject, build_bm25_document
from .indexer.bm25 import Bm25Index, bm25_search, build_bm25
from .indexer.embeddings import EmbeddingProvider, HashEmbeddingProvider
from .indexer.analysis import tokenize_for_index
from .indexer.vectors import ExactIndex, HnswIndex

PURE_SINGLE_MODES = ("full_text", "distill_core")
PURE_MULTI_MODES = ("distill_core_files", "distill_core_rooms", "distill_all")
PURE_MECHANISMS = ("hnsw", "exact", "bm25_okapi", "bm25_fts")
PURE_MULTI_FUSIONS = ("rrf", "weighted", "additive")

CROSS_TWO_MODES = (
    "cross_bm25v_hnswd", "cross_bm25v_hnswd_rev",
    "cross_hnswv_bm25d", "cross_hnswv_bm25d_rev",
)
CROSS_THREE_MODES = ("cross_3signal",)
HYBRID_MODES = ("hybrid_raw", "hybrid_raw_rev", "hybrid_core", "hybrid_core_rev")
COMPOUND_MECHANISMS = ("bm25_okapi+hnsw", "bm25_fts+hnsw")
TWO_SIGNAL_FUSIONS = ("rrf", "combmnz", "max", "w50", "w65", "w80", "w95")
THREE_SIGNAL_FUSIONS = TWO_SIGNAL_FUSIONS + ("weq", "w40_40_20")

DEFAULT_K = 7
DEFAULT_RRF_K = 60
DEFAULT_CANDIDATE_DEPTH = 50
# Core-dominant weights for the pure multi-field "weighted" fusion.
PURE_WEIGHTS = {2: (0.7, 0.3), 3: (0.5, 0.3, 0.2)}


class MissingIndexError(RuntimeError):
    pass


class FusionError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    family: str
    mode: str
    mechanism: str
    fusion: str
    k: int = DEFAULT_K

    @property
    def config_id(self) -> str:
        return f"{self.mode}:{self.mechanism}:{self.fusion}"


@dataclass
class RankedEntry:
    ref: str
    score: float
    rank: int


@dataclass
class RankedList:
    query_id: str
    config_id: str
    entries: list[RankedEntry] = field(default_factory=list)
    layer_provenance: dict[str, list[str]] = field(default_factory=dict)

    def refs(self) -> list[str]:
        return [e.ref for e in self.entries]


def enumerate_configs(space: str = "evaluated", k: int = DEFAULT_K) -> list[SearchConfig]:
    """Enumerate the config space; counts are exact (44/74/56/118)."""
    if space == "pure":
        out = [
            SearchConfig("pure", mode, mech, "passthrough", k)
            for mode in PURE_SINGLE_MODES for mech in PURE_MECHANISMS
        ]
        out += [
            SearchConfig("pure", mode, mech, fusion, k)
            for mode in PURE_MULTI_MODES for mech in PURE_MECHANISMS
            for fusion in PURE_MULTI_FUSIONS
        ]
        return out
    if space == "cross":
        out = [
            SearchConfig("cross_layer", mode, mech, fusion, k)
            for mode in CROSS_TWO_MODES for mech in COMPOUND_MECHANISMS
            for fusion in TWO_SIGNAL_FUSIONS
        ]
        out += [
            SearchConfig("cross_layer", mode, mech, fusion, k)
            for mode in CROSS_THREE_MODES for mech in COMPOUND_MECHANISMS
            for fusion in THREE_SIGNAL_FUSIONS
        ]
        return out
    if space == "hybrid":
        return [
            SearchConfig("hybrid", mode, mech, fusion, k)
            for mode in HYBRID_MODES for mech in COMPOUND_MECHANISMS
            for fusion in TWO_SIGNAL_FUSIONS
        ]
    if space == "evaluated":
        return enumerate_configs("pure", k) + enumerate_configs("cross", k)
    if space == "all":
        return enumerate_configs("evaluated", k) + enumerate_configs("hybrid", k)
    raise ValueError(f"unknown config space: {space!r}")


def config_by_id(config_id: str, k: int = DEFAULT_K) -> SearchConfig:
    for cfg in enumerate_configs("all", k):
        if cfg.config_id == config_id:
            return cfg
    raise KeyError(config_id)


# ---------------------------------------------------------------------------
# Fusion

def _minmax(entries: Sequence[tuple[str, float]]) -> dict[str, float]:
    """Per-list min-max normalization; degenerate lists map to 1.0."""
    if not entries:
        return {}
    scores = [s for _, s in entries]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        return {ref: 1.0 for ref, _ in entries}
    return {ref: (s - lo) / (hi - lo) for ref, s in entries}


def _fusion_weights(fusion: str, n_lists: int) -> tuple[float, ...]:
    if fusion == "weighted":
        try:
            return PURE_WEIGHTS[n_lists]
        except KeyError:
            raise FusionError(f"no declared weights for {n_lists} lists") from None
    if fusion == "weq":
        return tuple(1.0 / n_lists for _ in range(n_lists))
    if fusion == "w40_40_20":
        if n_lists != 3:
            raise FusionError("w40_40_20 needs exactly 3 lists")
        return (0.4, 0.4, 0.2)
    if fusion.startswith("w") and fusion[1:].isdigit():
        w = int(fusion[1:]) / 100.0
        rest = (1.0 - w) / (n_lists - 1) if n_lists > 1 else 0.0
        return (w,) + tuple(rest for _ in range(n_lists - 1))
    raise FusionError(f"unknown weighted fusion: {fusion!r}")


def fuse(lists: Sequence[Sequence[tuple[str, float]]], strategy: str,
         rrf_k: int = DEFAULT_RRF_K, weights: Sequence[float] | None = None) -> list[tuple[str, float]]:
    """Fuse ranked (ref, score) lists; ties break by ascending ref.

    Strategies: rrf (rank-based), weighted / wNN / weq / w40_40_20
    (min-max normalized interpolation, absent docs contribute 0),
    additive (unweighted normalized sum), combmnz (normalized sum times
    overlap count), max (best normalized score), passthrough (single
    list identity).
    """
    if not lists:
        raise FusionError("need at least one input list")
    if strategy == "passthrough":
        if len(lists) != 1:
            raise FusionError("passthrough takes exactly one list")
        return sorted(lists[0], key=lambda e: (-e[1], e[0]))
    # contributions are fsum-reduced so the result is independent of input
    # list order for the symmetric strategies (bit-exact, not just to ulp)
    parts: dict[str, list[float]] = {}
    if strategy == "rrf":
        for lst in lists:
            for rank, (ref, _) in enumerate(lst, start=1):
                parts.setdefault(ref, []).append(1.0 / (rrf_k + rank))
        fused = {ref: math.fsum(vals) for ref, vals in parts.items()}
    elif strategy in ("additive", "combmnz", "max"):
        for lst in lists:
            for ref, s in _minmax(lst).items():
                parts.setdefault(ref, []).append(s)
        if strategy == "max":
            fused = {ref: max(vals) for ref, vals in parts.items()}
        elif strategy == "additive":
            fused = {ref: math.fsum(vals) for ref, vals in parts.items()}
        else:
            fused = {ref: math.fsum(vals) * len(vals) for ref, vals in parts.items()}
    else:
        if weights is None:
            weights = _fusion_weights(strategy, len(lists))
        if len(weights) != len(lists):
            raise FusionError(
                f"{len(weights)} weights for {len(lists)} lists"
            )
        if abs(sum(weights) - 1.0) > 1e-9:
            raise FusionError("weights must sum to 1")
        for w, lst in zip(weights, lists):
            for ref, s in _minmax(lst).items():
                parts.setdefault(ref, []).append(w * s)
        fused = {ref: math.fsum(vals) for ref, vals in parts.items()}
    return sorted(fused.items(), key=lambda e: (-e[1], e[0]))


# ---------------------------------------------------------------------------
# Engine

CHUNK_CHARS = 2000
CHUNK_OVERLAP = 200

VERBATIM_VIEW = "verbatim"
DISTILLED_VIEWS = ("dcore", "dfiles", "drooms", "dall")


def chunk_text(text: str, size: int = CHUNK_CHARS, overlap: int = CHUNK_OVERLAP) -> list[str]:
    if len(text) <= size:
        return [text]
    step = size - overlap
    return [text[i : i + size] for i in range(0, len(text), step) if text[i : i + size]]


class SearchEngine:
    """Frozen two-layer search over exchanges and their distilled objects.

    Builds lexical and vector indexes per text view, executes any
    SearchConfig, and refuses to route a signal to the wrong layer.
    """

    def __init__(self, exchanges: Sequence[Exchange], objects: Sequence[DistilledObject],
                 embedder: EmbeddingProvider | None = None, k: int = DEFAULT_K,
                 rrf_k: int = DEFAULT_RRF_K, candidate_depth: int = DEFAULT_CANDIDATE_DEPTH,
                 hnsw_params: dict | None = None):
        self.embedder = embedder or HashEmbeddingProvider()
        self.k = k
        self.rrf_k = rrf_k
        self.candidate_depth = candidate_depth
        self.hnsw_params = hnsw_params or {}

        self.exchanges = {ex.ref: ex for ex in exchanges}
        self.objects = {obj.ref: obj for obj in objects}
        refs = sorted(self.exchanges)
        self.verbatim_texts = {ref: self.exchanges[ref].text() for ref in refs}
        obj_refs = sorted(self.objects)
        self._docs = {
            "verbatim": [(ref, self.verbatim_texts[ref]) for ref in refs],
            "dcore": [(ref, self.objects[ref].distill_text) for ref in obj_refs],
            "dfiles": [(ref, " ".join(self.objects[ref].files_touched)) for ref in obj_refs],
            "drooms": [
                (ref, " ".join(f"{r.room_key} {r.room_label}"
                               for r in self.objects[ref].room_assignments))
                for ref in obj_refs
            ],
            "dall": [(ref, build_bm25_document(self.objects[ref], ("core", "files", "rooms")))
                     for ref in obj_refs],
        }
        self._bm25_cache: dict[tuple[str, str], Bm25Index] = {}
        self._exact_cache: dict[str, ExactIndex] = {}
        self._hnsw_cache: dict[str, HnswIndex] = {}
        self._chunk_refs: list[str] | None = None

    # -- index plumbing ------------------------------------------------------

    def _layer_of(self, view: str) -> str:
        return "verbatim" if view == VERBATIM_VIEW else "distilled"

    def _bm25(self, view: str, variant: str) -> Bm25Index:
        key = (view, variant)
        if key not in self._bm25_cache:
            docs = self._docs[view]
            self._bm25_cache[key] = build_bm25([t for _, t in docs], variant=variant)
        return self._bm25_cache[key]

    def _vector_ids_and_matrix(self, view: str) -> tuple[list[str], np.ndarray]:
        if view == VERBATIM_VIEW:
            ids, texts = [], []
            for ref, text in self._docs[view]:
                for j, chunk in enumerate(chunk_text(text)):
                    ids.append(f"{ref}::chunk{j}")
                    texts.append(chunk)
            self._chunk_refs = [i.split("::chunk")[0] for i in ids]
        else:
            ids = [ref for ref, _ in self._docs[view]]
            texts = [t for _, t in self._docs[view]]
        if not texts:
            return ids, np.zeros((0, self.embedder.dimension), np.float32)
        mat = np.stack([self.embedder.embed(t) for t in texts])
        return ids, mat

    def _exact(self, view: str) -> ExactIndex:
        if view not in self._exact_cache:
            ids, mat = self._vector_ids_and_matrix(view)
            self._exact_cache[view] = ExactIndex(
                mat, ids, self.embedder.dimension, layer=self._layer_of(view)
            )
        return self._exact_cache[view]

    def _hnsw(self, view: str) -> HnswIndex:
        if view not in self._hnsw_cache:
            exact = self._exact(view)
            self._hnsw_cache[view] = HnswIndex(
                exact.matrix, exact.ids, exact.dimension,
                layer=self._layer_of(view), **self.hnsw_params,
            )
        return self._hnsw_cache[view]

    def _check_layer(self, view: str, expected_layer: str) -> None:
        actual = self._layer_of(view)
        if actual != expected_layer:
            raise MissingIndexError(
                f"signal expects layer {expected_layer!r} but view {view!r} is {actual!r}"
            )

    # -- signals -------------------------------------------------------------

    def _signal(self, mechanism: str, view: str, query: str, depth: int) -> list[tuple[str, float]]:
        """One (mechanism, view) ranking as (ref, score), depth-limited."""
        if view not in self._docs:
            raise MissingIndexError(f"no index for view {view!r}")
        if mechanism in ("bm25_okapi", "bm25_fts"):
            variant = mechanism.split("_", 1)[1]
            index = self._bm25(view, variant)
            ref_of = [ref for ref, _ in self._docs[view]]
            return [(ref_of[d], s) for d, s in bm25_search(query, index, depth)]
        if mechanism in ("exact", "hnsw"):
            qvec = self.embedder.embed(query)
            if view == VERBATIM_VIEW:
                raw_depth = depth * 4
            else:
                raw_depth = depth
            if mechanism == "exact":
                hits = self._exact(view).search(qvec, raw_depth)
            else:
                index = self._hnsw(view)
                hits = index.search(qvec, raw_depth, ef_search=max(index.ef_search, raw_depth))
            if view == VERBATIM_VIEW:
                pooled: dict[str, float] = {}
                for cid, s in hits:
                    ref = cid.split("::chunk")[0]
                    pooled[ref] = max(pooled.get(ref, -np.inf), s)
                hits = sorted(pooled.items(), key=lambda e: (-e[1], e[0]))[:depth]
            return [(ref, float(s)) for ref, s in hits]
        raise MissingIndexError(f"unknown mechanism {mechanism!r}")

    def _signals_for(self, config: SearchConfig) -> list[tuple[str, str, str]]:
        """(mechanism, view, expected_layer) triples, in weighting order."""
        mode, mech = config.mode, config.mechanism
        if config.family == "pure":
            views = {
                "full_text": [VERBATIM_VIEW],
                "distill_core": ["dcore"],
                "distill_core_files": ["dcore", "dfiles"],
                "distill_core_rooms": ["dcore", "drooms"],
                "distill_all": ["dcore", "dfiles", "drooms"],
            }[mode]
            layer = "verbatim" if mode == "full_text" else "distilled"
            return [(mech, v, layer) for v in views]
        bm25_part, vec_part = mech.split("+")
        if config.family == "cross_layer":
            sig = {
                "cross_bm25v_hnswd": [(bm25_part, VERBATIM_VIEW, "verbatim"),
                                      (vec_part, "dcore", "distilled")],
                "cross_hnswv_bm25d": [(vec_part, VERBATIM_VIEW, "verbatim"),
                                      (bm25_part, "dall", "distilled")],
                "cross_3signal": [(bm25_part, VERBATIM_VIEW, "verbatim"),
                                  (bm25_part, "dall", "distilled"),
                                  (vec_part, "dcore", "distilled")],
            }
            base = mode[:-4] if mode.endswith("_rev") else mode
            signals = sig[base]
            return list(reversed(signals)) if mode.endswith("_rev") else signals
        if config.family == "hybrid":
            layer_view = VERBATIM_VIEW if mode.startswith("hybrid_raw") else "dcore"
            layer = self._layer_of(layer_view)
            signals = [(vec_part, layer_view, layer), (bm25_part, layer_view, layer)]
            return list(reversed(signals)) if mode.endswith("_rev") else signals
        raise MissingIndexError(f"unknown family {config.family!r}")

    # -- execution -----------------------------------------------------------

    def run(self, config: SearchConfig, query: str, query_id: str = "q") -> RankedList:
        depth = max(config.k, self.candidate_depth)
        signals = self._signals_for(config)
        labels, lists = [], []
        for mech, view, layer in signals:
            self._check_layer(view, layer)
            labels.append(f"{mech}@{view}")
            lists.append(self._signal(mech, view, query, depth))
        if config.fusion == "passthrough":
            fused = fuse([lists[0]], "passthrough")
        else:
            fused = fuse(lists, config.fusion, rrf_k=self.rrf_k)
        fused = fused[: config.k]
        provenance = {}
        member_sets = [set(ref for ref, _ in lst) for lst in lists]
        for ref, _ in fused:
            provenance[ref] = [
                lab for lab, members in zip(labels, member_sets) if ref in members
            ]
        return RankedList(
            query_id=query_id,
            config_id=config.config_id,
            entries=[RankedEntry(ref, score, i + 1) for i, (ref, score) in enumerate(fused)],
            layer_provenance=provenance,
        )

    def verbatim_snippet(self, ref: str, truncate_chars: int = 1200) -> str:
        return self.verbatim_texts[ref][:truncate_chars]


# ---------------------------------------------------------------------------
# Post-hoc snippet reranking and gating features

def _snippet_bm25_scores(query: str, snippets: Sequence[str]) -> list[float]:
    index = build_bm25(list(snippets), variant="okapi")
    terms = tokenize_for_index(query, "okapi")
    from .indexer.bm25 import bm25_score
    return [bm25_score(terms, i, index) for i in range(len(snippets))]


def rerank_bm25_snippet(candidates: RankedList, query: str, verbatim_texts: dict[str, str],
                        lam: float = 0.7, truncate_chars: int = 1200) -> RankedList:
    """Blend each candidate's score with BM25 of the query against its
    verbatim display snippet: new = lam * norm(orig) + (1-lam) * norm(bm25).
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if not candidates.entries:
        return candidates
    snippets = [verbatim_texts[e.ref][:truncate_chars] for e in candidates.entries]
    bm25_raw = _snippet_bm25_scores(query, snippets)
    orig_norm = _minmax([(e.ref, e.score) for e in candidates.entries])
    bm25_norm = _minmax(list(zip([e.ref for e in candidates.entries], bm25_raw)))
    blended = [
        (e.ref, lam * orig_norm[e.ref] + (1.0 - lam) * bm25_norm[e.ref])
        for e in candidates.entries
    ]
    blended.sort(key=lambda rs: (-rs[1], rs[0]))
    return RankedList(
        query_id=candidates.query_id,
        config_id=f"{candidates.config_id}+rerank{lam}",
        entries=[RankedEntry(ref, s, i + 1) for i, (ref, s) in enumerate(blended)],
        layer_provenance=candidates.layer_provenance,
    )


def gate_features(query: str, candidates: RankedList, verbatim_texts: dict[str, str],
                  truncate_chars: int = 1200) -> dict[str, float]:
    """The four query-time features examined for gating the reranker."""
    if not candidates.entries:
        raise ValueError("candidates must be nonempty")
    entries = candidates.entries
    snippets = [verbatim_texts[e.ref][:truncate_chars] for e in entries]
    bm25_raw = _snippet_bm25_scores(query, snippets)
    qterms = set(tokenize_for_index(query, "okapi"))
    snip_terms = set(tokenize_for_index(snippets[0], "okapi"))
    overlap = len(qterms & snip_terms) / len(qterms) if qterms else 0.0
    return {
        "original_top_score": entries[0].score,
        "margin_1_2": entries[0].score - entries[1].score if len(entries) > 1 else 0.0,
        "bm25_of_rank1": bm25_raw[0],
        "query_term_overlap_fraction": overlap,
    }


# ---------------------------------------------------------------------------
# Run files (TREC-style)

def write_run_file(results: Iterable[RankedList], path: str | Path,
                   sidecar_path: str | Path | None = None) -> None:
    results = list(results)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rl in results:
            for e in rl.entries:
                fh.write(f"{rl.query_id}\t{rl.config_id}\t{e.ref}\t{e.rank}\t{e.score:.6f}\n")
    if sidecar_path is not None:
        with open(sidecar_path, "w", encoding="utf-8", newline="\n") as fh:
            for rl in results:
                fh.write(json.dumps({
                    "query_id": rl.query_id,
                    "config_id": rl.config_id,
                    "provenance": rl.layer_provenance,
                }, ensure_ascii=False) + "\n")


def read_run_file(path: str | Path) -> dict[tuple[str, str], list[tuple[str, float]]]:
    """(query_id, config_id) -> ordered [(ref, score)]."""
    runs: dict[tuple[str, str], list[tuple[str, float]]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            qid, cid, ref, rank, score = line.split("\t")
            runs.setdefault((qid, cid), []).append((ref, float(score)))
    return runs

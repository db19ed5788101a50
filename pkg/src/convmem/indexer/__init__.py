"""Lexical and vector indexing over the verbatim and distilled layers."""

from .analysis import idf_table, idf_of_unseen, porter_stem, tokenize_for_index, STOPWORDS
from .bm25 import Bm25Index, UnknownDocError, bm25_score, bm25_search, build_bm25
from .embeddings import (
    DEFAULT_DIM,
    EmbeddingError,
    EmbeddingProvider,
    HashEmbeddingProvider,
    embed,
    get_embedding_provider,
)
from .vectors import (
    DimensionMismatchError,
    ExactIndex,
    HnswIndex,
    IndexConfigError,
    load_vector_store,
    save_vector_store,
)

__all__ = [
    "Bm25Index", "UnknownDocError", "bm25_score", "bm25_search", "build_bm25",
    "idf_table", "idf_of_unseen", "porter_stem", "tokenize_for_index", "STOPWORDS",
    "DEFAULT_DIM", "EmbeddingError", "EmbeddingProvider", "HashEmbeddingProvider",
    "embed", "get_embedding_provider",
    "DimensionMismatchError", "ExactIndex", "HnswIndex", "IndexConfigError",
    "load_vector_store", "save_vector_store",
]

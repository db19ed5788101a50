"""convmem: a single-user conversational memory engine.

Segments agent-conversation logs into exchanges, distills each into a
compact structured object, indexes both the verbatim and distilled text
layers, serves multi-mechanism fused search, and evaluates retrieval
quality with a multi-grader consensus and statistics pipeline.
"""

from .config import PipelineConfig
from .corpus import (
    CorpusStats,
    Exchange,
    Message,
    SegmentConfig,
    compute_corpus_stats,
    filter_and_split,
    segment_conversation,
    segment_corpus,
)
from .distiller import (
    DistillConfig,
    DistilledObject,
    FallbackDistiller,
    RoomAssignment,
    build_bm25_document,
    build_distill_prompt,
    distill_corpus,
    distill_exchange,
    extract_files_touched,
    parse_distill_response,
    room_id,
)
from .searcher import (
    RankedEntry,
    RankedList,
    SearchConfig,
    SearchEngine,
    enumerate_configs,
    fuse,
    gate_features,
    rerank_bm25_snippet,
)
from .synth import SynthCorpus, generate_corpus
from .tokenizers import count_tokens, get_tokenizer

__version__ = "0.1.0"

__all__ = [
    "PipelineConfig",
    "CorpusStats", "Exchange", "Message", "SegmentConfig",
    "compute_corpus_stats", "filter_and_split", "segment_conversation", "segment_corpus",
    "DistillConfig", "DistilledObject", "FallbackDistiller", "RoomAssignment",
    "build_bm25_document", "build_distill_prompt", "distill_corpus", "distill_exchange",
    "extract_files_touched", "parse_distill_response", "room_id",
    "RankedEntry", "RankedList", "SearchConfig", "SearchEngine",
    "enumerate_configs", "fuse", "gate_features", "rerank_bm25_snippet",
    "SynthCorpus", "generate_corpus",
    "count_tokens", "get_tokenizer",
    "__version__",
]

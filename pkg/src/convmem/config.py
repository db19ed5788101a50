"""Pipeline configuration: one human-editable JSON file.

Every constant and seed lands in the report's run_config echo so any
result can be reproduced. Unknown keys are rejected outright.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path


class ConfigFileError(ValueError):
    pass


@dataclass
class PipelineConfig:
    store_dir: str = "store"
    # segmentation
    min_chars: int = 200
    max_plies: int = 20
    tokenizer: str = "whitespace"
    # distillation
    distill_provider: str = "fallback"  # fallback | cmd:<command> | http:<url>
    distill_truncate_chars: int = 2000
    distill_attempts: int = 3
    # embedding / vector search
    embedder: str = "hash"  # hash | cmd:<command> | http:<url>
    embedding_dim: int = 384
    hnsw_m: int = 16
    hnsw_ef_construction: int = 200
    hnsw_ef_search: int = 200
    hnsw_seed: int = 42
    # search
    k: int = 7
    rrf_k: int = 60
    candidate_depth: int = 50
    rerank_lambda: float = 0.7
    snippet_truncate_chars: int = 1200
    # grading
    graders: list[str] = field(default_factory=lambda: ["mock:5"])
    escalator: str = "mock:escalator"
    grade_workers: int = 4
    # statistics
    seed: int = 0
    bootstrap_resamples: int = 10_000
    strict_metrics: bool = True
    vocab_top_k: int = 10
    distill_workers: int = 4

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigFileError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigFileError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigFileError(f"{path}: config must be a JSON object")
        return cls.from_dict(data)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8"
        )

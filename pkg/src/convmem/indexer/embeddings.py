"""Embedding providers.

The engine never downloads model weights. Real embedding models plug in
through an external command or HTTP endpoint returning a fixed-dimension
vector; the built-in fallback is deterministic signed feature hashing,
which keeps the whole pipeline runnable offline.
"""

from __future__ import annotations

import hashlib
import json
import shlex
import subprocess
from typing import Protocol

import numpy as np

from .analysis import tokenize_for_index

DEFAULT_DIM = 384


class EmbeddingError(RuntimeError):
    def __init__(self, message: str, text_id: str | None = None):
        super().__init__(message if text_id is None else f"{message} (text_id={text_id})")
        self.text_id = text_id


class EmbeddingProvider(Protocol):
    name: str
    dimension: int

    def embed(self, text: str) -> np.ndarray: ...


def _l2_normalize(vec: np.ndarray) -> np.ndarray:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec
    return vec / norm


class HashEmbeddingProvider:
    """Signed feature hashing of tokens into ``dimension`` buckets.

    Scheme (documented so vectors are reproducible by hand):
      * tokens = okapi analyzer output;
      * bucket(t)  = BLAKE2b-64(t) mod d;
      * sign(t)    = +1 if the high bit of BLAKE2b-64(t) is 0 else -1;
      * v          = sum over token occurrences of sign(t) * e_bucket(t);
      * empty token sequence -> e_0 (the defined constant vector);
      * output     = v / ||v||_2.
    """

    name = "feature-hash"

    def __init__(self, dimension: int = DEFAULT_DIM):
        if dimension < 1:
            raise ValueError("dimension must be >= 1")
        self.dimension = dimension

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dimension, dtype=np.float32)
        tokens = tokenize_for_index(text, "okapi")
        if not tokens:
            vec[0] = 1.0
            return vec
        for tok in tokens:
            h = int.from_bytes(
                hashlib.blake2b(tok.encode("utf-8"), digest_size=8).digest(), "big"
            )
            sign = 1.0 if h < (1 << 63) else -1.0
            vec[h % self.dimension] += sign
        return _l2_normalize(vec)


class CommandEmbeddingProvider:
    """Runs an external command; the vector comes back as a JSON array on stdout.

    The command template receives the text on stdin.
    """

    def __init__(self, command: str, dimension: int = DEFAULT_DIM, timeout: float = 60.0):
        self.name = f"cmd:{command}"
        self.command = command
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        try:
            proc = subprocess.run(
                shlex.split(self.command),
                input=text.encode("utf-8"),
                capture_output=True,
                timeout=self.timeout,
                check=True,
            )
        except (subprocess.SubprocessError, OSError) as exc:
            raise EmbeddingError(f"embedding command failed: {exc}") from exc
        vec = np.asarray(json.loads(proc.stdout.decode("utf-8")), dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise EmbeddingError(
                f"embedding command returned shape {vec.shape}, expected ({self.dimension},)"
            )
        return _l2_normalize(vec)


class HttpEmbeddingProvider:
    """POSTs {"text": ...} to an endpoint returning {"vector": [...]}."""

    def __init__(self, url: str, dimension: int = DEFAULT_DIM, timeout: float = 60.0):
        self.name = f"http:{url}"
        self.url = url
        self.dimension = dimension
        self.timeout = timeout

    def embed(self, text: str) -> np.ndarray:
        import urllib.request

        req = urllib.request.Request(
            self.url,
            data=json.dumps({"text": text}).encode("utf-8"),
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except OSError as exc:
            raise EmbeddingError(f"embedding endpoint failed: {exc}") from exc
        vec = np.asarray(payload["vector"], dtype=np.float32)
        if vec.shape != (self.dimension,):
            raise EmbeddingError(
                f"embedding endpoint returned shape {vec.shape}, expected ({self.dimension},)"
            )
        return _l2_normalize(vec)


def embed(text: str, provider: EmbeddingProvider) -> np.ndarray:
    """Embed ``text``; always unit-normalized, deterministic per provider."""
    return provider.embed(text)


def get_embedding_provider(spec: str, dimension: int = DEFAULT_DIM) -> EmbeddingProvider:
    """Resolve a provider spec: ``hash``, ``cmd:<command>`` or ``http:<url>``."""
    if spec == "hash":
        return HashEmbeddingProvider(dimension)
    if spec.startswith("cmd:"):
        return CommandEmbeddingProvider(spec[4:], dimension)
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpEmbeddingProvider(spec, dimension)
    raise ValueError(f"unknown embedding provider spec: {spec!r}")

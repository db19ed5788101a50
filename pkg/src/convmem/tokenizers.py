"""Token counting behind a provider interface.

Token statistics must be comparable across runs, so every stats artifact
records which tokenizer produced its counts. Two providers ship built in:
a cl100k_base-compatible one (requires the optional ``tiktoken`` extra)
and a deterministic whitespace tokenizer that needs nothing.
"""

from __future__ import annotations

import logging
from typing import Protocol

logger = logging.getLogger(__name__)


class TokenizerProvider(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class WhitespaceTokenizer:
    """Counts whitespace-separated chunks. Deterministic, dependency-free."""

    name = "whitespace"

    def count(self, text: str) -> int:
        return len(text.split())


class Cl100kTokenizer:
    """cl100k_base token counting via tiktoken (optional dependency)."""

    name = "cl100k_base"

    def __init__(self):
        try:
            import tiktoken
        except ImportError as exc:  # pragma: no cover - env-dependent
            raise RuntimeError(
                "tiktoken is not installed; install the 'cl100k' extra "
                "or use the whitespace tokenizer"
            ) from exc
        self._enc = tiktoken.get_encoding("cl100k_base")

    def count(self, text: str) -> int:
        return len(self._enc.encode(text))


def get_tokenizer(name: str = "cl100k_base") -> TokenizerProvider:
    """Resolve a tokenizer by name, falling back to whitespace.

    The fallback is silent in the return value but recorded via a warning
    so stats metadata can note the substitution.
    """
    if name == "whitespace":
        return WhitespaceTokenizer()
    if name == "cl100k_base":
        try:
            return Cl100kTokenizer()
        except RuntimeError:
            logger.warning(
                "cl100k_base tokenizer unavailable, falling back to whitespace"
            )
            return WhitespaceTokenizer()
    raise ValueError(f"unknown tokenizer: {name!r}")


def count_tokens(text: str, tokenizer: TokenizerProvider) -> int:
    return tokenizer.count(text)

"""Conversation logs, exchange segmentation, and corpus statistics.

A conversation is an ordered list of role-tagged messages (plies). A user
message opens a half-ply; the assistant's substantive response completes
it. Contiguous ply ranges form exchanges, which are the unit of
distillation and retrieval. Tool-only round trips never close an exchange:
the exchange stays open until the assistant produces substantive text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .tokenizers import TokenizerProvider, WhitespaceTokenizer

ROLES = ("user", "assistant")


class MalformedInputError(ValueError):
    """Raised when a conversation log violates the documented schema."""


class ConfigError(ValueError):
    """Raised for invalid segmentation / pipeline configuration values."""


class EmptyCorpusError(ValueError):
    """Raised when a stats computation receives an empty collection."""


@dataclass(frozen=True)
class Message:
    role: str
    text: str
    is_tool_only: bool
    conversation_id: str
    ply_index: int
    project_id: str = ""
    timestamp: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise MalformedInputError(f"role must be user|assistant, got {self.role!r}")

    @property
    def substantive(self) -> bool:
        """True when the message carries prose beyond tool traffic."""
        return not self.is_tool_only and bool(self.text.strip())


@dataclass
class Exchange:
    conversation_id: str
    project_id: str
    ply_start: int
    ply_end: int
    messages: list[Message]
    char_len: int = 0
    token_len: int = 0
    incomplete: bool = False

    def __post_init__(self):
        if self.ply_start > self.ply_end:
            raise MalformedInputError("ply_start must be <= ply_end")
        if not self.messages:
            raise MalformedInputError("exchange needs at least one message")
        if not self.char_len:
            self.char_len = sum(len(m.text) for m in self.messages)

    @property
    def ref(self) -> str:
        return f"{self.conversation_id}#{self.ply_start}-{self.ply_end}"

    @property
    def n_plies(self) -> int:
        return self.ply_end - self.ply_start + 1

    def text(self) -> str:
        return "\n".join(m.text for m in self.messages)


@dataclass(frozen=True)
class SegmentConfig:
    min_chars: int = 200
    max_plies: int = 20

    def __post_init__(self):
        if self.min_chars < 0:
            raise ConfigError("min_chars must be >= 0")
        if self.max_plies < 2:
            raise ConfigError("max_plies must be >= 2")


@dataclass
class CorpusStats:
    n_conversations: int
    n_exchanges: int
    n_distilled: int
    avg_verbatim_tokens: float
    avg_distilled_tokens: float
    ratio_from_totals: float
    ratio_per_item: float
    tokenizer: str = "whitespace"


def segment_conversation(messages: Sequence[Message], cfg: SegmentConfig | None = None) -> list[Exchange]:
    """Split one conversation's messages into exchanges.

    A new exchange opens at a user message that follows an assistant
    message with substantive (non-tool-only) text. Tool-only round trips
    leave the current exchange open. A trailing exchange that never got a
    substantive assistant response is kept and flagged ``incomplete``.
    """
    if not messages:
        return []
    conv_ids = {m.conversation_id for m in messages}
    if len(conv_ids) != 1:
        raise MalformedInputError(f"messages span {len(conv_ids)} conversations")
    for a, b in zip(messages, messages[1:]):
        if b.ply_index <= a.ply_index:
            raise MalformedInputError(
                f"ply_index not strictly increasing at {b.ply_index}"
            )

    exchanges: list[Exchange] = []
    current: list[Message] = []
    prev: Message | None = None

    def close(buf: list[Message]) -> None:
        if not buf:
            return
        if buf[0].role != "user":
            raise MalformedInputError("exchange must start with a user message")
        has_answer = any(m.role == "assistant" and m.substantive for m in buf)
        exchanges.append(
            Exchange(
                conversation_id=buf[0].conversation_id,
                project_id=buf[0].project_id,
                ply_start=buf[0].ply_index,
                ply_end=buf[-1].ply_index,
                messages=list(buf),
                incomplete=not has_answer,
            )
        )

    for msg in messages:
        opens = (
            msg.role == "user"
            and prev is not None
            and prev.role == "assistant"
            and prev.substantive
        )
        if opens and current:
            close(current)
            current = []
        if not current and msg.role == "assistant":
            # No open exchange can absorb a leading assistant message; the
            # exchange invariant requires a user message first.
            prev = msg
            continue
        current.append(msg)
        prev = msg
    close(current)
    return exchanges


def filter_and_split(exchanges: Iterable[Exchange], cfg: SegmentConfig) -> list[Exchange]:
    """Split over-long exchanges at fixed ply intervals, then drop trivially
    short ones.

    Splitting happens before the length filter so that a second application
    is a no-op (fragments are themselves subject to the min-char filter).
    """
    out: list[Exchange] = []
    for ex in exchanges:
        for frag in _split_exchange(ex, cfg.max_plies):
            if frag.char_len >= cfg.min_chars:
                out.append(frag)
    return out


def _split_exchange(ex: Exchange, max_plies: int) -> Iterator[Exchange]:
    if ex.n_plies <= max_plies:
        yield ex
        return
    for i in range(0, len(ex.messages), max_plies):
        part = ex.messages[i : i + max_plies]
        yield Exchange(
            conversation_id=ex.conversation_id,
            project_id=ex.project_id,
            ply_start=part[0].ply_index,
            ply_end=part[-1].ply_index,
            messages=part,
            incomplete=ex.incomplete,
        )


def attach_token_lengths(exchanges: Iterable[Exchange], tokenizer: TokenizerProvider) -> None:
    for ex in exchanges:
        ex.token_len = tokenizer.count(ex.text())


def compute_corpus_stats(exchanges: Sequence[Exchange], distilled, tokenizer: TokenizerProvider | None = None) -> CorpusStats:
    """Token-budget statistics over the verbatim and distilled layers.

    ``distilled`` is a sequence of distilled objects (anything with a
    ``token_len`` attribute) or plain per-item token counts.
    ``ratio_from_totals`` divides total verbatim tokens by total distilled
    tokens; ``ratio_per_item`` divides the two per-item averages. They
    differ whenever the two collections have different cardinalities.
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    if not exchanges or not len(distilled):
        raise EmptyCorpusError("corpus stats need nonempty exchange and distilled collections")
    verbatim = [ex.token_len or tokenizer.count(ex.text()) for ex in exchanges]
    d_tokens = [d if isinstance(d, (int, float)) else d.token_len for d in distilled]
    n_ex, n_d = len(verbatim), len(d_tokens)
    avg_v = sum(verbatim) / n_ex
    avg_d = sum(d_tokens) / n_d
    if avg_d <= 0:
        raise EmptyCorpusError("distilled layer has zero total tokens")
    return CorpusStats(
        n_conversations=len({ex.conversation_id for ex in exchanges}),
        n_exchanges=n_ex,
        n_distilled=n_d,
        avg_verbatim_tokens=avg_v,
        avg_distilled_tokens=avg_d,
        ratio_from_totals=(n_ex * avg_v) / (n_d * avg_d),
        ratio_per_item=avg_v / avg_d,
        tokenizer=tokenizer.name,
    )


# ---------------------------------------------------------------------------
# On-disk formats (JSONL, UTF-8, LF)

def read_messages(path: str | Path) -> list[Message]:
    """Read the corpus input format: one message object per line."""
    messages = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedInputError(f"{path}:{lineno}: invalid JSON") from exc
            try:
                messages.append(
                    Message(
                        role=rec["role"],
                        text=rec["text"],
                        is_tool_only=bool(rec.get("is_tool_only", False)),
                        conversation_id=rec["conversation_id"],
                        ply_index=int(rec["ply_index"]),
                        project_id=rec.get("project_id", ""),
                        timestamp=rec.get("timestamp"),
                    )
                )
            except KeyError as exc:
                raise MalformedInputError(f"{path}:{lineno}: missing field {exc}") from exc
    return messages


def group_by_conversation(messages: Sequence[Message]) -> dict[str, list[Message]]:
    convs: dict[str, list[Message]] = {}
    for m in messages:
        convs.setdefault(m.conversation_id, []).append(m)
    for conv in convs.values():
        conv.sort(key=lambda m: m.ply_index)
    return convs


def segment_corpus(messages: Sequence[Message], cfg: SegmentConfig) -> list[Exchange]:
    """Segment every conversation and apply split+filter, in a stable order."""
    convs = group_by_conversation(messages)
    out: list[Exchange] = []
    for conv_id in sorted(convs):
        out.extend(segment_conversation(convs[conv_id], cfg))
    return filter_and_split(out, cfg)


def write_exchanges(exchanges: Iterable[Exchange], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in exchanges:
            rec = {
                "conversation_id": ex.conversation_id,
                "project_id": ex.project_id,
                "ply_start": ex.ply_start,
                "ply_end": ex.ply_end,
                "char_len": ex.char_len,
                "token_len": ex.token_len,
                "incomplete": ex.incomplete,
                "messages": [
                    {k: v for k, v in asdict(m).items() if v is not None}
                    for m in ex.messages
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_exchanges(path: str | Path) -> list[Exchange]:
    exchanges = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            msgs = [Message(**m) for m in rec["messages"]]
            ex = Exchange(
                conversation_id=rec["conversation_id"],
                project_id=rec["project_id"],
                ply_start=rec["ply_start"],
                ply_end=rec["ply_end"],
                messages=msgs,
                char_len=rec["char_len"],
                token_len=rec.get("token_len", 0),
                incomplete=rec.get("incomplete", False),
            )
            exchanges.append(ex)
    return exchanges

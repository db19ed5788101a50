"""Exchange distillation into compact structured routing objects.

Each resolved exchange becomes one object with four components: a 1-2
sentence core, one concrete technical detail, 1-3 thematic room
assignments, and regex-extracted file paths. The first three come from an
LLM provider; files are never generated, only extracted. A deterministic
rule-based fallback distiller keeps the pipeline runnable without any
model.
"""

from __future__ import annotations

import hashlib
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Exchange
from .indexer.analysis import idf_table, tokenize_for_index
from .providers import ProviderError, TextProvider
from .tokenizers import TokenizerProvider, WhitespaceTokenizer

ROOM_TYPES = ("file", "concept", "workflow")

BATCH_PROMPT = """Distill this conversation exchange into JSON:

- "exchange_core": 1-2 sentences. What was accomplished or decided?
  Use the specific terms from the exchange. Do not invent details
  not present in the text. If the exchange is mostly empty, say so
  briefly.
- "specific_context": One concrete detail from the text: a number,
  error message, parameter name, or file path. Copy it exactly from
  the text. Do not use the project path.
- "room_assignments": 1-3 rooms. Each room is a topic this exchange
  belongs to. {{"room_type": "<file|concept|workflow>",
  "room_key": "<identifier>", "room_label": "<short label>",
  "relevance": <0.0-1.0>}}. A room should be specific enough to
  group related exchanges (e.g. "retry_timeout" not "errors").

Do NOT include "files_touched".

Project: {project_id}

Exchange (messages {ply_start}-{ply_end}):
{messages_text}

Respond with ONLY valid JSON.
"""

# Lighter per-turn variant: keyword tags instead of room placement. Kept as
# a template only; the batch pipeline never uses it.
PER_TURN_PROMPT = """Distill this conversation exchange into JSON:

- "exchange_core": 1-2 sentences. What was accomplished or decided?
  Use the specific terms from the exchange. Do not invent details
  not present in the text.
- "specific_context": One concrete detail from the text: a number,
  error message, parameter name, or file path. Copy it exactly from
  the text. Do not use the project path.
- "tags": 2-4 keywords for this exchange.

Do NOT include "files_touched".

Project: {project_id}

Exchange (messages {ply_start}-{ply_end}):
{messages_text}

Respond with ONLY valid JSON.
"""


class DistillParseError(ValueError):
    """Provider output could not be turned into a distilled object.

    Carries the raw text so retry logic and skip-lists can record it.
    """

    def __init__(self, message: str, raw: str):
        super().__init__(message)
        self.raw = raw


class DistillFailure(RuntimeError):
    """All attempts for one exchange failed; the exchange goes to the skip-list."""


def room_id(room_type: str, room_key: str, project_id: str) -> int:
    """Stable 64-bit id: BLAKE2b-64 over "type\\x1Fkey\\x1Fproject" UTF-8 bytes.

    Keys are hashed as received (no case folding).
    """
    payload = f"{room_type}\x1f{room_key}\x1f{project_id}".encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "big")


@dataclass(frozen=True)
class RoomAssignment:
    room_type: str
    room_key: str
    room_label: str
    relevance: float
    room_id: int

    @classmethod
    def make(cls, room_type: str, room_key: str, room_label: str, relevance: float,
             project_id: str) -> "RoomAssignment":
        if room_type not in ROOM_TYPES:
            raise ValueError(f"room_type must be one of {ROOM_TYPES}, got {room_type!r}")
        relevance = min(1.0, max(0.0, float(relevance)))
        return cls(room_type, room_key, room_label, relevance,
                   room_id(room_type, room_key, project_id))


@dataclass
class DistilledObject:
    exchange_core: str
    specific_context: str
    room_assignments: list[RoomAssignment]
    files_touched: list[str]
    conversation_id: str
    ply_start: int
    ply_end: int
    project_id: str
    distill_text: str = ""
    token_len: int = 0

    def __post_init__(self):
        if not 1 <= len(self.room_assignments) <= 3:
            raise ValueError("room_assignments must hold 1-3 rooms")
        expected = f"{self.exchange_core}\n{self.specific_context}"
        if not self.distill_text:
            self.distill_text = expected
        elif self.distill_text != expected:
            raise ValueError("distill_text must be exchange_core + newline + specific_context")

    @property
    def ref(self) -> str:
        return f"{self.conversation_id}#{self.ply_start}-{self.ply_end}"


@dataclass(frozen=True)
class DistillConfig:
    truncate_chars: int = 2000
    attempts: int = 3
    files_cap: int = 20
    workers: int = 4


def build_distill_prompt(exchange: Exchange, project_id: str, truncate_chars: int = 2000) -> str:
    """Interpolate the batch template; byte-stable for fixed inputs."""
    lines = []
    for msg in exchange.messages:
        lines.append(f"[{msg.role}] {msg.text[:truncate_chars]}")
    return BATCH_PROMPT.format(
        project_id=project_id,
        ply_start=exchange.ply_start,
        ply_end=exchange.ply_end,
        messages_text="\n".join(lines),
    )


def _iter_json_objects(raw: str):
    decoder = json.JSONDecoder()
    i = 0
    while True:
        start = raw.find("{", i)
        if start == -1:
            return
        try:
            obj, end = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            i = start + 1
            continue
        if isinstance(obj, dict):
            yield obj, end
            i = end
        else:
            i = start + 1


def parse_distill_response(raw: str) -> dict:
    """Extract and validate the first well-formed JSON object in ``raw``.

    Returns {"exchange_core", "specific_context", "room_assignments"} with
    relevance clamped into [0, 1]; more than 3 rooms keeps the 3 highest
    relevance (input order breaks ties); a files_touched field in the
    response is dropped silently.
    """
    for obj, _ in _iter_json_objects(raw):
        return _validate_distill(obj, raw)
    raise DistillParseError("no JSON object found in provider output", raw)


def _validate_distill(obj: dict, raw: str) -> dict:
    for fld in ("exchange_core", "specific_context", "room_assignments"):
        if fld not in obj:
            raise DistillParseError(f"missing required field {fld!r}", raw)
    core, ctx = obj["exchange_core"], obj["specific_context"]
    if not isinstance(core, str) or not isinstance(ctx, str):
        raise DistillParseError("exchange_core/specific_context must be strings", raw)
    rooms_in = obj["room_assignments"]
    if not isinstance(rooms_in, list) or not rooms_in:
        raise DistillParseError("room_assignments must be a nonempty list", raw)
    rooms = []
    for i, r in enumerate(rooms_in):
        if not isinstance(r, dict):
            raise DistillParseError("each room must be an object", raw)
        rtype, rkey = r.get("room_type"), r.get("room_key")
        if rtype not in ROOM_TYPES:
            raise DistillParseError(f"bad room_type {rtype!r}", raw)
        if not isinstance(rkey, str) or not rkey:
            raise DistillParseError("room_key must be a nonempty string", raw)
        rel = r.get("relevance", 1.0)
        if not isinstance(rel, (int, float)):
            raise DistillParseError("relevance must be numeric", raw)
        rooms.append({
            "room_type": rtype,
            "room_key": rkey,
            "room_label": str(r.get("room_label", rkey)),
            "relevance": min(1.0, max(0.0, float(rel))),
            "_order": i,
        })
    if len(rooms) > 3:
        rooms.sort(key=lambda r: (-r["relevance"], r["_order"]))
        rooms = rooms[:3]
        rooms.sort(key=lambda r: r["_order"])
    for r in rooms:
        del r["_order"]
    return {"exchange_core": core, "specific_context": ctx, "room_assignments": rooms}


# File-path extraction. Two patterns: slash-containing paths and bare
# filenames with an extension; URLs are masked out first and pure numbers
# never count.
_URL_RE = re.compile(r"\w+://\S+")
_SLASH_PATH_RE = re.compile(r"[A-Za-z0-9_~-]+(?:/[A-Za-z0-9_.~-]+)+")
_BARE_FILE_RE = re.compile(r"[A-Za-z0-9_-]+\.[A-Za-z0-9]{1,8}")
_PURE_NUMBER_RE = re.compile(r"[\d.]+$")


def extract_files_touched(exchange_text: str, cap: int = 20) -> list[str]:
    """Deduplicated, first-occurrence-ordered path mentions, capped."""
    masked = _URL_RE.sub(lambda m: " " * len(m.group()), exchange_text)
    matches: list[tuple[int, str]] = []
    spans: list[tuple[int, int]] = []
    for m in _SLASH_PATH_RE.finditer(masked):
        matches.append((m.start(), m.group()))
        spans.append(m.span())
    for m in _BARE_FILE_RE.finditer(masked):
        if any(s <= m.start() < e for s, e in spans):
            continue
        matches.append((m.start(), m.group()))
    matches.sort(key=lambda pm: pm[0])
    seen: set[str] = set()
    out: list[str] = []
    for _, path in matches:
        path = path.rstrip(".")  # sentence punctuation, not part of the path
        if not path or _PURE_NUMBER_RE.fullmatch(path):
            continue
        if path not in seen:
            seen.add(path)
            out.append(path)
        if len(out) >= cap:
            break
    return out


def distill_exchange(exchange: Exchange, provider: TextProvider,
                     cfg: DistillConfig = DistillConfig(),
                     tokenizer: TokenizerProvider | None = None) -> DistilledObject:
    """Prompt -> provider (with retries on parse errors) -> object."""
    tokenizer = tokenizer or WhitespaceTokenizer()
    prompt = build_distill_prompt(exchange, exchange.project_id, cfg.truncate_chars)
    last_error: Exception | None = None
    for _ in range(cfg.attempts):
        try:
            raw = provider.complete(prompt)
            parsed = parse_distill_response(raw)
            break
        except (ProviderError, DistillParseError) as exc:
            last_error = exc
    else:
        raise DistillFailure(f"{exchange.ref}: {last_error}")
    rooms = [
        RoomAssignment.make(r["room_type"], r["room_key"], r["room_label"],
                            r["relevance"], exchange.project_id)
        for r in parsed["room_assignments"]
    ]
    return _finish_object(exchange, parsed["exchange_core"], parsed["specific_context"],
                          rooms, cfg, tokenizer)


def _finish_object(exchange: Exchange, core: str, ctx: str, rooms: list[RoomAssignment],
                   cfg: DistillConfig, tokenizer: TokenizerProvider) -> DistilledObject:
    obj = DistilledObject(
        exchange_core=core,
        specific_context=ctx,
        room_assignments=rooms,
        files_touched=extract_files_touched(exchange.text(), cfg.files_cap),
        conversation_id=exchange.conversation_id,
        ply_start=exchange.ply_start,
        ply_end=exchange.ply_end,
        project_id=exchange.project_id,
    )
    obj.token_len = tokenizer.count(obj.distill_text)
    return obj


_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


def _first_sentence(text: str) -> str:
    text = text.strip()
    if not text:
        return ""
    return _SENTENCE_RE.split(text, maxsplit=1)[0].strip()


class FallbackDistiller:
    """Deterministic rule-based distiller (test double for the LLM).

    Pure function of (exchange, corpus IDF table): the exchange core is
    the first sentence of the first user message plus the first sentence
    of the last substantive assistant message; the specific context is
    the line containing the exchange's highest-IDF token; one concept
    room keyed by that token.
    """

    name = "fallback"

    def __init__(self, exchanges: Sequence[Exchange]):
        self.idf = idf_table([tokenize_for_index(ex.text(), "okapi") for ex in exchanges])

    def _rarest_token(self, text: str) -> str:
        tokens = tokenize_for_index(text, "okapi")
        if not tokens:
            return ""
        first_pos: dict[str, int] = {}
        for i, t in enumerate(tokens):
            first_pos.setdefault(t, i)
        return max(first_pos, key=lambda t: (self.idf.get(t, 0.0), -first_pos[t]))

    def distill(self, exchange: Exchange, cfg: DistillConfig = DistillConfig(),
                tokenizer: TokenizerProvider | None = None) -> DistilledObject:
        tokenizer = tokenizer or WhitespaceTokenizer()
        first_user = next((m for m in exchange.messages if m.role == "user"), None)
        last_assistant = next(
            (m for m in reversed(exchange.messages) if m.role == "assistant" and m.substantive),
            None,
        )
        parts = []
        if first_user is not None:
            parts.append(_first_sentence(first_user.text))
        if last_assistant is not None:
            s = _first_sentence(last_assistant.text)
            if s and s not in parts:
                parts.append(s)
        core = " ".join(p for p in parts if p)[:240] or "(empty exchange)"

        text = exchange.text()
        token = self._rarest_token(text)
        context = ""
        if token:
            for line in text.splitlines():
                if token in tokenize_for_index(line, "okapi"):
                    context = line.strip()
                    break
        context = context[:240] or token or "(no context)"
        room = RoomAssignment.make(
            "concept", token.lower() or "misc", token or "misc", 1.0, exchange.project_id
        )
        return _finish_object(exchange, core, context, [room], cfg, tokenizer)


def distill_corpus(exchanges: Sequence[Exchange], provider: TextProvider | None = None,
                   cfg: DistillConfig = DistillConfig(),
                   tokenizer: TokenizerProvider | None = None,
                   include_incomplete: bool = False):
    """Distill every (complete) exchange; failures land in the skip list.

    Runs provider calls with bounded parallelism; output order is always
    (conversation_id, ply_start) regardless of completion order.
    Returns (objects, skip_entries).
    """
    tokenizer = tokenizer or WhitespaceTokenizer()
    todo = [ex for ex in exchanges if include_incomplete or not ex.incomplete]
    todo.sort(key=lambda ex: (ex.conversation_id, ex.ply_start))
    fallback = FallbackDistiller(exchanges) if provider is None else None

    def work(ex: Exchange):
        if fallback is not None:
            return fallback.distill(ex, cfg, tokenizer), None
        try:
            return distill_exchange(ex, provider, cfg, tokenizer), None
        except DistillFailure as exc:
            return None, {
                "conversation_id": ex.conversation_id,
                "ply_start": ex.ply_start,
                "ply_end": ex.ply_end,
                "reason": str(exc),
            }

    objects: list[DistilledObject] = []
    skips: list[dict] = []
    if fallback is not None or cfg.workers <= 1:
        results = [work(ex) for ex in todo]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(work, todo))
    for obj, skip in results:
        if obj is not None:
            objects.append(obj)
        else:
            skips.append(skip)
    return objects, skips


def build_bm25_document(obj: DistilledObject, facets: Iterable[str] = ("core",)) -> str:
    """Concatenate the object's searchable text for a facet set.

    Fixed order: exchange_core, specific_context, files (if requested),
    then room keys and labels. The core fields are always included.
    """
    facets = set(facets) | {"core"}
    unknown = facets - {"core", "files", "rooms"}
    if unknown:
        raise ValueError(f"unknown facets: {sorted(unknown)}")
    parts = [obj.distill_text]
    if "files" in facets and obj.files_touched:
        parts.append(" ".join(obj.files_touched))
    if "rooms" in facets and obj.room_assignments:
        parts.append(" ".join(f"{r.room_key} {r.room_label}" for r in obj.room_assignments))
    return " ".join(parts)


# ---------------------------------------------------------------------------
# Store formats

STORE_HEADER = {"format": "palace-object", "version": 1}


def write_objects(objects: Iterable[DistilledObject], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(STORE_HEADER) + "\n")
        for obj in objects:
            rec = {
                "exchange_core": obj.exchange_core,
                "specific_context": obj.specific_context,
                "room_assignments": [
                    {
                        "room_type": r.room_type,
                        "room_key": r.room_key,
                        "room_label": r.room_label,
                        "relevance": r.relevance,
                        "room_id": r.room_id,
                    }
                    for r in obj.room_assignments
                ],
                "files_touched": obj.files_touched,
                "conversation_id": obj.conversation_id,
                "ply_start": obj.ply_start,
                "ply_end": obj.ply_end,
                "project_id": obj.project_id,
                "distill_text": obj.distill_text,
                "token_len": obj.token_len,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_objects(path: str | Path) -> list[DistilledObject]:
    objects = []
    with open(path, encoding="utf-8") as fh:
        header = json.loads(fh.readline())
        if header.get("format") != STORE_HEADER["format"]:
            raise ValueError(f"{path}: not a palace-object store")
        if header.get("version") != STORE_HEADER["version"]:
            raise ValueError(f"{path}: unsupported store version {header.get('version')}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            rooms = [
                RoomAssignment(
                    room_type=r["room_type"],
                    room_key=r["room_key"],
                    room_label=r["room_label"],
                    relevance=r["relevance"],
                    room_id=r["room_id"],
                )
                for r in rec["room_assignments"]
            ]
            objects.append(
                DistilledObject(
                    exchange_core=rec["exchange_core"],
                    specific_context=rec["specific_context"],
                    room_assignments=rooms,
                    files_touched=rec["files_touched"],
                    conversation_id=rec["conversation_id"],
                    ply_start=rec["ply_start"],
                    ply_end=rec["ply_end"],
                    project_id=rec["project_id"],
                    distill_text=rec["distill_text"],
                    token_len=rec["token_len"],
                )
            )
    return objects


def write_skiplist(skips: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in skips:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

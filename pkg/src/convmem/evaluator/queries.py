"""Query records and the stratified candidate sampler.

The sampler produces the candidate *pool* for query construction:
proportional to corpus share per project group, balanced across roles,
length-windowed, stripped of tool traffic and markup. Curation of the
final query set stays manual.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import Message

logger = logging.getLogger(__name__)

QUERY_TYPES = ("conceptual", "phrase", "exact_term")


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str
    query_type: str
    project_group: str = ""
    target_ref: str | None = None  # planted ground truth, synthetic corpora only

    def __post_init__(self):
        if self.query_type not in QUERY_TYPES:
            raise ValueError(f"query_type must be one of {QUERY_TYPES}")


@dataclass(frozen=True)
class SampleConfig:
    min_chars: int = 40
    max_chars: int = 400
    oversample: float = 2.0


_CODE_BLOCK_RE = re.compile(r"```.*?```", re.DOTALL)
_SYSTEM_TAG_RE = re.compile(r"<[^>\n]{1,80}>")


def _clean_text(text: str) -> str:
    text = _CODE_BLOCK_RE.sub(" ", text)
    text = _SYSTEM_TAG_RE.sub(" ", text)
    return re.sub(r"\s+", " ", text).strip()


def _proportional_allocation(shares: dict[str, int], pool: int) -> dict[str, int]:
    """Largest-remainder allocation of ``pool`` seats by corpus share."""
    total = sum(shares.values())
    if total == 0:
        return {g: 0 for g in shares}
    raw = {g: pool * c / total for g, c in shares.items()}
    alloc = {g: int(raw[g]) for g in shares}
    leftovers = sorted(shares, key=lambda g: (-(raw[g] - alloc[g]), g))
    for g in leftovers[: pool - sum(alloc.values())]:
        alloc[g] += 1
    return alloc


def stratified_query_sample(messages: Sequence[Message], pool_size: int, seed: int,
                            cfg: SampleConfig = SampleConfig()) -> list[Message]:
    """Sample a candidate message pool, deterministically per seed.

    Allocation is proportional to each project group's corpus share; user
    and assistant messages are drawn in equal proportions inside a group;
    eligibility requires the cleaned text to fit the char window. An empty
    stratum logs a warning and its seats move to the remaining strata.
    """
    rng = random.Random(seed)
    groups: dict[str, list[Message]] = {}
    for m in messages:
        groups.setdefault(m.project_id, []).append(m)
    shares = {g: len(ms) for g, ms in groups.items()}
    target_pool = int(round(pool_size * cfg.oversample))
    alloc = _proportional_allocation(shares, target_pool)

    eligible: dict[str, dict[str, list[Message]]] = {}
    for g, ms in groups.items():
        by_role = {"user": [], "assistant": []}
        for m in ms:
            if m.is_tool_only:
                continue
            cleaned = _clean_text(m.text)
            if cfg.min_chars <= len(cleaned) <= cfg.max_chars:
                by_role[m.role].append(m)
        eligible[g] = by_role

    empty = [g for g in alloc if alloc[g] > 0
             and not (eligible[g]["user"] or eligible[g]["assistant"])]
    if empty:
        logger.warning("strata with no eligible messages: %s; redistributing", empty)
        orphaned = sum(alloc[g] for g in empty)
        for g in empty:
            alloc[g] = 0
        rest = {g: shares[g] for g in alloc if g not in empty}
        if rest and orphaned:
            extra = _proportional_allocation(rest, orphaned)
            for g, e in extra.items():
                alloc[g] += e

    pool: list[Message] = []
    for g in sorted(alloc):
        want = alloc[g]
        if want == 0:
            continue
        users = sorted(eligible[g]["user"], key=lambda m: (m.conversation_id, m.ply_index))
        assistants = sorted(eligible[g]["assistant"], key=lambda m: (m.conversation_id, m.ply_index))
        take_user = min(want // 2 + want % 2, len(users))
        take_asst = min(want - take_user, len(assistants))
        # a role short on eligible messages hands its seats to the other
        take_user = min(want - take_asst, len(users))
        pool.extend(rng.sample(users, take_user))
        pool.extend(rng.sample(assistants, take_asst))
    return pool


def write_queries(queries: Iterable[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            rec = {
                "query_id": q.query_id,
                "text": q.text,
                "query_type": q.query_type,
                "project_group": q.project_group,
            }
            if q.target_ref is not None:
                rec["target_ref"] = q.target_ref
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_queries(path: str | Path) -> list[Query]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            out.append(Query(
                query_id=rec["query_id"],
                text=rec["text"],
                query_type=rec["query_type"],
                project_group=rec.get("project_group", ""),
                target_ref=rec.get("target_ref"),
            ))
    return out

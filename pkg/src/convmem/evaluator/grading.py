"""LLM relevance grading: prompts, response parsing, mock graders.

Graders see a query and a result snippet and answer with reasoning plus a
0-3 grade as JSON. Verbatim snippets are truncated at the display length;
distilled snippets are short and never truncated. Parse failures are data
(treated as missing at random), never exceptions.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..indexer.analysis import tokenize_for_index
from ..providers import ProviderError, TextProvider

GRADING_PROMPT = """You are a strict relevance assessor for a conversational
search system.

QUERY: "{query}"

SEARCH RESULT:
---
{snippet}
---

Grade this result's relevance to the query on a 0-3 scale.

SCALE:
0 = Irrelevant: The result has nothing to do with the query.
    Different topic entirely.

1 = Related: The result is on a related topic but does NOT
    answer the query. It may mention similar concepts or
    share terminology, but a user would not find what they
    were looking for.

2 = Highly Relevant: The result contains an answer or useful
    information for the query, but the answer may be unclear,
    incomplete, or buried among other content.

3 = Perfectly Relevant: The result is dedicated to the query
    topic and directly provides the information sought.

GRADING RULES:
- The key test for grade 2 vs grade 1: does the result
  contain a usable answer? If yes, grade 2+. If it is merely
  on a related topic, grade 1.
- Only assign grade 3 if the result specifically and clearly
  addresses the query.
- When uncertain between two grades, assign the lower one.
- A result about a related but different tool, version, or
  concept is grade 1, not grade 2.

Respond with a JSON object. Write your reasoning first,
then the grade.
{{"reason": "<10-20 word justification>", "grade": <0|1|2|3>}}
"""

# Calibration block for the escalating grader: judge the conversation the
# snippet came from, not the visible excerpt alone.
ESCALATOR_CALIBRATION = """
CALIBRATION:
- Judge whether the CONVERSATION addresses the query topic, not
  whether the visible snippet contains the full answer.
- Snippets are excerpts from long conversations: a truncated
  response or a matching user question can still show that the
  conversation is relevant.
"""

_MARKER = "\n\nGrade this result's relevance"
ESCALATOR_PROMPT = GRADING_PROMPT.replace(
    _MARKER, ESCALATOR_CALIBRATION + _MARKER.lstrip("\n"), 1
)


def build_grading_prompt(query: str, snippet: str, truncate_chars: int | None = None,
                         escalator: bool = False) -> str:
    """Interpolate the grading template.

    ``truncate_chars`` applies to verbatim snippets; pass None for
    distilled snippets, which are never truncated.
    """
    if truncate_chars is not None:
        snippet = snippet[:truncate_chars]
    template = ESCALATOR_PROMPT if escalator else GRADING_PROMPT
    return template.format(query=query, snippet=snippet)


@dataclass
class GradeRecord:
    query_id: str
    config_id: str
    exchange_ref: str
    grader_id: str
    grade: int | None
    reason: str
    parse_failed: bool

    def __post_init__(self):
        if (self.grade is None) == (not self.parse_failed):
            raise ValueError("grade must be present exactly when parsing succeeded")


def parse_grade(raw: str) -> tuple[int | None, str, bool]:
    """Extract (grade, reason, parse_failed) from grader output.

    Takes the last well-formed JSON object whose integer "grade" is in
    {0,1,2,3}; anything else is a parse failure, which is recorded as
    data rather than raised.
    """
    decoder = json.JSONDecoder()
    found: tuple[int, str] | None = None
    i = 0
    while True:
        start = raw.find("{", i)
        if start == -1:
            break
        try:
            obj, end = decoder.raw_decode(raw, start)
        except json.JSONDecodeError:
            i = start + 1
            continue
        i = end
        if isinstance(obj, dict) and isinstance(obj.get("grade"), int) \
                and not isinstance(obj.get("grade"), bool) and obj["grade"] in (0, 1, 2, 3):
            found = (obj["grade"], str(obj.get("reason", "")))
    if found is None:
        return None, "", True
    return found[0], found[1], False


def grade_once(provider: TextProvider, query_id: str, config_id: str, exchange_ref: str,
               query: str, snippet: str, truncate_chars: int | None) -> GradeRecord:
    prompt = build_grading_prompt(query, snippet, truncate_chars)
    try:
        raw = provider.complete(prompt)
    except ProviderError as exc:
        return GradeRecord(query_id, config_id, exchange_ref, provider.name,
                           None, f"provider error: {exc}", True)
    grade, reason, failed = parse_grade(raw)
    return GradeRecord(query_id, config_id, exchange_ref, provider.name,
                       grade, reason, failed)


def grade_pairs(graders: Sequence[TextProvider], items: Sequence[dict],
                workers: int = 4) -> list[GradeRecord]:
    """Fan every (query, config, result) item out to every grader.

    Items carry {query_id, config_id, exchange_ref, query, snippet,
    truncate_chars}. Output order is deterministic: by item order, then
    grader order.
    """
    tasks = [
        (grader, item)
        for item in items
        for grader in graders
    ]

    def run(task):
        grader, item = task
        return grade_once(
            grader, item["query_id"], item["config_id"], item["exchange_ref"],
            item["query"], item["snippet"], item.get("truncate_chars"),
        )

    if workers <= 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, tasks))


class MockGrader:
    """Deterministic scripted grader: a pure function of the query/result
    token overlap, with per-grader thresholds so five instances disagree
    in realistic ways. Emits raw JSON text so the parse path is exercised,
    including an occasional deterministic refusal.
    """

    def __init__(self, grader_id: str, strictness: float = 0.0, refusal_rate: int = 0):
        self.name = grader_id
        self.strictness = strictness
        self.refusal_rate = refusal_rate

    def _h(self, prompt: str) -> int:
        key = f"{self.name}|{prompt}".encode("utf-8")
        return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "big")

    def complete(self, prompt: str) -> str:
        h = self._h(prompt)
        if self.refusal_rate and h % self.refusal_rate == 0:
            return "I cannot grade this result."
        try:
            query = prompt.split('QUERY: "', 1)[1].split('"\n', 1)[0]
            snippet = prompt.split("---\n", 1)[1].rsplit("\n---", 1)[0]
        except IndexError:
            return "no query found"
        qterms = set(tokenize_for_index(query, "okapi"))
        sterms = set(tokenize_for_index(snippet, "okapi"))
        overlap = len(qterms & sterms) / len(qterms) if qterms else 0.0
        score = overlap - self.strictness
        if score >= 0.75:
            grade = 3
        elif score >= 0.5:
            grade = 2
        elif score > 0.15:
            grade = 1
        else:
            grade = 0
        # small deterministic dissent so consensus tiers and escalation occur
        wobble = h % 17
        if wobble == 0 and grade > 0:
            grade -= 1
        elif wobble == 1 and grade < 3:
            grade += 1
        return json.dumps({"reason": f"overlap {overlap:.2f}", "grade": grade})


def make_mock_graders(n: int = 5, refusal_rate: int = 53) -> list[MockGrader]:
    """Five graders with staggered strictness; deterministic end to end."""
    return [
        MockGrader(f"mock-g{i+1}", strictness=0.05 * (i - n // 2), refusal_rate=refusal_rate)
        for i in range(n)
    ]


# ---------------------------------------------------------------------------
# Grade store (JSONL, append-only)

def append_grades(records: Iterable[GradeRecord], path: str | Path) -> None:
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(json.dumps({
                "query_id": r.query_id,
                "config_id": r.config_id,
                "exchange_ref": r.exchange_ref,
                "grader_id": r.grader_id,
                "grade": r.grade,
                "reason": r.reason,
                "parse_failed": r.parse_failed,
            }, ensure_ascii=False) + "\n")


def read_grades(path: str | Path) -> list[GradeRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            records.append(GradeRecord(
                query_id=rec["query_id"],
                config_id=rec["config_id"],
                exchange_ref=rec["exchange_ref"],
                grader_id=rec["grader_id"],
                grade=rec["grade"],
                reason=rec.get("reason", ""),
                parse_failed=rec["parse_failed"],
            ))
    return records

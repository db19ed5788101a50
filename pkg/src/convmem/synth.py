"""Deterministic synthetic corpus generator.

The private production corpus cannot ship, so acceptance runs on
generated conversations whose correct recall targets are known by
construction: every exchange plants unique rare identifier tokens, a
unique file path, and a topic phrase, and queries are generated against
those plants. Exact-term queries carry both planted tokens of their
target, which makes grade-free P@1 checks possible.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .corpus import Message
from .evaluator.queries import Query

TOPICS = [
    ("connection pool timeout", "pool exhaustion under load"),
    ("retry backoff policy", "exponential backoff with jitter"),
    ("schema migration ordering", "migration lock contention"),
    ("cache invalidation strategy", "stale read after write"),
    ("rate limiter window", "token bucket refill drift"),
    ("websocket reconnect handling", "half-open socket detection"),
    ("index rebuild scheduling", "nightly compaction stall"),
    ("query planner regression", "nested loop join blowup"),
    ("memory arena fragmentation", "allocator high watermark"),
    ("tls certificate rotation", "expired intermediate chain"),
    ("log shipping backpressure", "dropped batch acknowledgement"),
    ("feature flag rollout", "percentage ramp misfire"),
    ("worker queue starvation", "priority inversion in consumers"),
    ("embedding batch sizing", "padded sequence waste"),
    ("shard rebalancing", "hot partition skew"),
    ("deadline propagation", "grpc context cancellation"),
    ("config reload race", "watcher double fire"),
    ("pagination cursor drift", "duplicate rows across pages"),
    ("metrics cardinality explosion", "label combination growth"),
    ("snapshot restore verification", "checksum mismatch on replay"),
]

FILLER = [
    "We looked at the recent incident notes first.",
    "The staging run reproduced it on the second attempt.",
    "That matches what the dashboard showed yesterday.",
    "I compared the behaviour against the previous release.",
    "The failing case only appears under concurrent writes.",
    "We agreed to document the decision in the runbook.",
    "The fix keeps the public interface unchanged.",
    "Rolling back was considered and rejected.",
    "The reviewer asked for one more regression test.",
    "Latency went back to baseline after the change.",
]


@dataclass
class SynthCorpus:
    messages: list[Message]
    queries: list[Query]
    n_conversations: int
    n_exchanges: int
    exchange_refs: list[str] = field(default_factory=list)
    seed: int = 0


def _primary_token(i: int) -> str:
    return f"zq{i:04d}mark"


def _secondary_token(i: int) -> str:
    return f"kv{i:04d}tag"


def _path(i: int) -> str:
    return f"src/mod{i % 37}/part{i:04d}.py"


def generate_corpus(n_exchanges: int = 1000, n_queries: int = 50, seed: int = 0,
                    projects: tuple = (("alpha", 5), ("beta", 3), ("gamma", 2)),
                    tool_ply_rate: float = 0.25,
                    incomplete_rate: float = 0.03) -> SynthCorpus:
    """Generate a corpus with planted, per-exchange recall targets.

    ``n_exchanges`` counts resolved exchanges; a small fraction of
    conversations additionally end with an unanswered user request, which
    segments into an extra incomplete exchange (excluded from distillation,
    so the distilled count stays below the exchange count as in real
    corpora).
    """
    rng = random.Random(seed)
    names = [p for p, _ in projects]
    weights = [w for _, w in projects]

    messages: list[Message] = []
    refs: list[str] = []
    exchange_meta: list[dict] = []

    conv_idx = 0
    ex_idx = 0
    while ex_idx < n_exchanges:
        conv_id = f"c{conv_idx:05d}"
        project = rng.choices(names, weights=weights)[0]
        ply = 0
        for _ in range(rng.randint(1, 4)):
            if ex_idx >= n_exchanges:
                break
            topic_i = rng.randrange(len(TOPICS))
            concept, phrase = TOPICS[topic_i]
            tok1, tok2 = _primary_token(ex_idx), _secondary_token(ex_idx)
            path = _path(ex_idx)
            ply_start = ply

            user_text = (
                f"How should we handle the {concept} issue in {path}? "
                f"The error trace mentions {tok1} and the ticket references {tok2}. "
                + rng.choice(FILLER)
            )
            messages.append(Message("user", user_text, False, conv_id, ply, project))
            ply += 1

            if rng.random() < tool_ply_rate:
                messages.append(Message(
                    "assistant", f"[tool] grep -rn {tok1} src/", True, conv_id, ply, project))
                ply += 1
                messages.append(Message(
                    "user", f"[tool-result] {path}: marker {tok1} found", True,
                    conv_id, ply, project))
                ply += 1

            assistant_text = (
                f"The root cause was {phrase}; the marker {tok1} comes from the guard "
                f"in {path}. Renaming the flag to {tok2} silences {tok1} in CI, and "
                f"{tok2} is now the canonical name, so the {concept} report is "
                f"resolved. " + " ".join(rng.sample(FILLER, 2))
            )
            messages.append(Message("assistant", assistant_text, False, conv_id, ply, project))
            ply += 1

            refs.append(f"{conv_id}#{ply_start}-{ply - 1}")
            exchange_meta.append({
                "ref": refs[-1],
                "project": project,
                "topic_i": topic_i,
                "ex_idx": ex_idx,
            })
            ex_idx += 1
        if ply > 0 and rng.random() < incomplete_rate:
            concept, _ = TOPICS[rng.randrange(len(TOPICS))]
            hanging = (
                f"One more thing before we wrap up: could you also look into the "
                f"{concept} behaviour we saw last week? It only shows up "
                f"intermittently and I have not managed to reproduce it locally, "
                f"so any pointers on where to add instrumentation would help."
            )
            messages.append(Message("user", hanging, False, conv_id, ply, project))
        conv_idx += 1

    queries: list[Query] = []
    target_meta = rng.sample(exchange_meta, min(n_queries, len(exchange_meta)))
    for qi, meta in enumerate(target_meta):
        concept, phrase = TOPICS[meta["topic_i"]]
        i = meta["ex_idx"]
        kind = ("exact_term", "phrase", "conceptual")[qi % 3]
        if kind == "exact_term":
            text = f"{_primary_token(i)} {_secondary_token(i)}"
        elif kind == "phrase":
            text = f"{phrase} {_path(i)}"
        else:
            text = f"what did we decide about {concept}"
        queries.append(Query(
            query_id=f"q{qi:03d}",
            text=text,
            query_type=kind,
            project_group=meta["project"],
            target_ref=meta["ref"],
        ))

    return SynthCorpus(
        messages=messages,
        queries=queries,
        n_conversations=conv_idx,
        n_exchanges=len(refs),
        exchange_refs=refs,
        seed=seed,
    )

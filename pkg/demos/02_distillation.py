#!/usr/bin/env python3
"""Walkthrough: distilling exchanges into compact routing objects.

The production path calls an LLM provider with a fixed JSON prompt. This
demo uses the deterministic rule-based fallback, then shows the provider
path with a scripted stand-in, including the retry loop.
"""

import json

from convmem.corpus import Message, SegmentConfig, segment_corpus
from convmem.distiller import (
    DistillConfig,
    FallbackDistiller,
    build_distill_prompt,
    distill_exchange,
    extract_files_touched,
)
from convmem.providers import CallableProvider
from convmem.synth import generate_corpus

synth = generate_corpus(n_exchanges=30, n_queries=5, seed=1)
exchanges = segment_corpus(synth.messages, SegmentConfig())
complete = [ex for ex in exchanges if not ex.incomplete]

# Rule-based fallback: exchange core from the opening/closing sentences,
# specific context from the line holding the rarest (highest-IDF) token.
fallback = FallbackDistiller(complete)
obj = fallback.distill(complete[0])
print("fallback object:")
print(f"  core:    {obj.exchange_core[:90]}")
print(f"  context: {obj.specific_context[:90]}")
print(f"  room:    {obj.room_assignments[0].room_type}:"
      f"{obj.room_assignments[0].room_key} (id={obj.room_assignments[0].room_id})")
print(f"  files:   {obj.files_touched}")
print(f"  tokens:  {obj.token_len} (vs {complete[0].token_len or 'n/a'} verbatim)")

# files_touched is extraction, never generation:
print("\nregex extraction:",
      extract_files_touched("edited src/main.py, see https://example.com/x.py and a.txt"))

# The provider path: prompt -> JSON -> object, with retries on bad output.
prompt = build_distill_prompt(complete[0], complete[0].project_id, truncate_chars=2000)
print("\nprompt head:")
print("\n".join(prompt.splitlines()[:4]))

answers = iter([
    "sorry, I had trouble",                      # attempt 1: unparseable
    json.dumps({                                  # attempt 2: valid
        "exchange_core": "Resolved the pool exhaustion report.",
        "specific_context": "pool_timeout = 30",
        "room_assignments": [
            {"room_type": "concept", "room_key": "pool_timeout",
             "room_label": "Pool timeout", "relevance": 0.9},
        ],
    }),
])
flaky = CallableProvider(lambda _prompt: next(answers), name="demo-llm")
obj2 = distill_exchange(complete[0], flaky, DistillConfig(attempts=3))
print(f"\nprovider object after one retry: core={obj2.exchange_core!r}")

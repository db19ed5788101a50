#!/usr/bin/env python3
"""Walkthrough: ply-model segmentation and corpus token statistics.

A conversation is a list of role-tagged messages. A new exchange opens at
a user message that follows a substantive assistant reply; tool-only
round trips never close an exchange.
"""

from convmem.corpus import (
    Message,
    SegmentConfig,
    compute_corpus_stats,
    filter_and_split,
    segment_conversation,
)
from convmem.tokenizers import get_tokenizer

conv = [
    Message("user", "Why does the connection pool keep timing out?", False, "demo", 0),
    Message("assistant", "[tool] grep -rn pool_timeout src/", True, "demo", 1),
    Message("user", "[tool-result] src/db/pool.py:41: pool_timeout = 5", True, "demo", 2),
    Message("assistant", "The pool timeout is 5s; under load the acquire wait "
                         "exceeds it. Raising pool_timeout to 30 in src/db/pool.py "
                         "fixes the drop.", False, "demo", 3),
    Message("user", "Great, also update the runbook please.", False, "demo", 4),
    Message("assistant", "Done: documented the new pool_timeout in docs/runbook.md.",
            False, "demo", 5),
]

exchanges = segment_conversation(conv)
print(f"{len(conv)} messages -> {len(exchanges)} exchanges")
for ex in exchanges:
    roles = ",".join(m.role[0] for m in ex.messages)
    print(f"  {ex.ref}: plies {ex.ply_start}-{ex.ply_end} [{roles}] "
          f"chars={ex.char_len} incomplete={ex.incomplete}")

# The tool round trip (plies 1-2) stayed inside the first exchange.
assert exchanges[0].n_plies == 4

# Trivially short exchanges are dropped; over-long ones split at fixed
# ply intervals.
kept = filter_and_split(exchanges, SegmentConfig(min_chars=60, max_plies=20))
print(f"after filter/split at min_chars=60: {len(kept)} exchanges")

# Token statistics compare the verbatim layer against any distilled layer;
# here the "distilled" side is a stand-in list of token counts.
tokenizer = get_tokenizer("whitespace")
for ex in kept:
    ex.token_len = tokenizer.count(ex.text())
stats = compute_corpus_stats(kept, [12] * len(kept), tokenizer)
print(f"avg verbatim tokens: {stats.avg_verbatim_tokens:.1f}")
print(f"compression from totals: {stats.ratio_from_totals:.1f}x, "
      f"per item: {stats.ratio_per_item:.1f}x (tokenizer={stats.tokenizer})")

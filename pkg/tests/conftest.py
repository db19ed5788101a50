from __future__ import annotations

import pytest

from convmem.corpus import Message, SegmentConfig, segment_corpus
from convmem.distiller import distill_corpus
from convmem.synth import generate_corpus


def msg(role, text, conv="c0", ply=0, tool=False, project="p0"):
    return Message(role=role, text=text, is_tool_only=tool,
                   conversation_id=conv, ply_index=ply, project_id=project)


def conversation(*specs, conv="c0", project="p0"):
    """Build a message list from (role, text[, tool]) tuples."""
    out = []
    for i, spec in enumerate(specs):
        role, text = spec[0], spec[1]
        tool = spec[2] if len(spec) > 2 else False
        out.append(msg(role, text, conv=conv, ply=i, tool=tool, project=project))
    return out


@pytest.fixture(scope="session")
def small_corpus():
    """120-exchange synthetic corpus with segmented exchanges and objects."""
    synth = generate_corpus(n_exchanges=120, n_queries=18, seed=3)
    exchanges = segment_corpus(synth.messages, SegmentConfig())
    objects, skips = distill_corpus(exchanges)
    assert not skips
    return synth, exchanges, objects

import json
import random

import pytest

from convmem.corpus import Exchange
from convmem.distiller import (
    BATCH_PROMPT,
    DistillConfig,
    DistilledObject,
    DistillFailure,
    DistillParseError,
    FallbackDistiller,
    RoomAssignment,
    build_bm25_document,
    build_distill_prompt,
    distill_corpus,
    distill_exchange,
    extract_files_touched,
    parse_distill_response,
    read_objects,
    room_id,
    write_objects,
)
from convmem.indexer.analysis import idf_table, tokenize_for_index
from convmem.providers import CallableProvider

from conftest import msg


def make_exchange(user="How do we fix the pool?", assistant="Raised timeout in src/db.py.",
                  conv="c0", project="proj"):
    return Exchange(
        conversation_id=conv, project_id=project, ply_start=0, ply_end=1,
        messages=[msg("user", user, conv=conv, ply=0, project=project),
                  msg("assistant", assistant, conv=conv, ply=1, project=project)],
    )


VALID_RESPONSE = json.dumps({
    "exchange_core": "Raised the pool timeout.",
    "specific_context": "timeout=30 in src/db.py",
    "room_assignments": [
        {"room_type": "concept", "room_key": "pool_timeout",
         "room_label": "Pool timeout", "relevance": 0.9},
        {"room_type": "file", "room_key": "src/db.py",
         "room_label": "db module", "relevance": 0.7},
    ],
})


class TestPrompt:
    def test_contains_instruction_block_and_range(self):
        ex = make_exchange()
        prompt = build_distill_prompt(ex, "proj", 2000)
        assert 'Do NOT include "files_touched".' in prompt
        assert "Respond with ONLY valid JSON." in prompt
        assert "Exchange (messages 0-1):" in prompt
        assert "Project: proj" in prompt

    def test_truncation(self):
        ex = make_exchange(user="u" * 10_000)
        prompt = build_distill_prompt(ex, "proj", 2000)
        line = [l for l in prompt.splitlines() if l.startswith("[user]")][0]
        assert len(line) == len("[user] ") + 2000

    def test_byte_stable(self):
        ex = make_exchange()
        assert build_distill_prompt(ex, "p", 500) == build_distill_prompt(ex, "p", 500)

    def test_template_placeholders(self):
        for placeholder in ("{project_id}", "{ply_start}", "{ply_end}", "{messages_text}"):
            assert placeholder in BATCH_PROMPT


class TestParseResponse:
    def test_valid_two_rooms(self):
        parsed = parse_distill_response(VALID_RESPONSE)
        assert len(parsed["room_assignments"]) == 2
        assert parsed["exchange_core"] == "Raised the pool timeout."

    def test_json_embedded_in_prose(self):
        raw = "Here is the JSON: " + VALID_RESPONSE + " hope that helps!"
        parsed = parse_distill_response(raw)
        assert parsed["specific_context"] == "timeout=30 in src/db.py"

    def test_four_rooms_keep_three_highest_relevance(self):
        rooms = [
            {"room_type": "concept", "room_key": f"k{i}", "room_label": f"k{i}",
             "relevance": rel}
            for i, rel in enumerate([0.5, 0.9, 0.5, 0.8])
        ]
        raw = json.dumps({"exchange_core": "c", "specific_context": "s",
                          "room_assignments": rooms})
        parsed = parse_distill_response(raw)
        keys = [r["room_key"] for r in parsed["room_assignments"]]
        # 0.9 and 0.8 kept; the 0.5 tie keeps the earlier one (k0)
        assert keys == ["k0", "k1", "k3"]

    def test_no_json(self):
        with pytest.raises(DistillParseError):
            parse_distill_response("no json here at all")

    def test_missing_field(self):
        with pytest.raises(DistillParseError):
            parse_distill_response(json.dumps({"exchange_core": "x"}))

    def test_zero_rooms(self):
        raw = json.dumps({"exchange_core": "c", "specific_context": "s",
                          "room_assignments": []})
        with pytest.raises(DistillParseError):
            parse_distill_response(raw)

    def test_bad_room_type(self):
        raw = json.dumps({"exchange_core": "c", "specific_context": "s",
                          "room_assignments": [{"room_type": "zone", "room_key": "k"}]})
        with pytest.raises(DistillParseError):
            parse_distill_response(raw)

    def test_relevance_clamped_and_defaulted(self):
        raw = json.dumps({"exchange_core": "c", "specific_context": "s",
                          "room_assignments": [
                              {"room_type": "concept", "room_key": "a", "relevance": 7},
                              {"room_type": "concept", "room_key": "b"},
                          ]})
        parsed = parse_distill_response(raw)
        assert parsed["room_assignments"][0]["relevance"] == 1.0
        assert parsed["room_assignments"][1]["relevance"] == 1.0

    def test_files_touched_dropped_silently(self):
        obj = json.loads(VALID_RESPONSE)
        obj["files_touched"] = ["hallucinated.py"]
        parsed = parse_distill_response(json.dumps(obj))
        assert "files_touched" not in parsed

    def test_parse_error_carries_raw(self):
        try:
            parse_distill_response("garbage")
        except DistillParseError as exc:
            assert exc.raw == "garbage"


class TestExtractFiles:
    def test_slash_paths(self):
        text = "edited src/main.ext and docs/readme.md"
        assert extract_files_touched(text) == ["src/main.ext", "docs/readme.md"]

    def test_no_paths(self):
        assert extract_files_touched("no paths here") == []

    def test_dedupe_and_order(self):
        assert extract_files_touched("a.txt a.txt b/a.txt") == ["a.txt", "b/a.txt"]

    def test_urls_excluded(self):
        text = "see https://example.com/a/b.html and src/real.py"
        assert extract_files_touched(text) == ["src/real.py"]

    def test_pure_numbers_excluded(self):
        assert extract_files_touched("version 3.14 and 127.0.0.1") == []

    def test_cap_at_20(self):
        text = " ".join(f"dir/f{i}.py" for i in range(30))
        assert len(extract_files_touched(text)) == 20

    def test_extraction_never_hallucinates(self):
        rng = random.Random(4)
        words = ["src/app.py", "note", "b.txt", "https://x.io/y.js", "plain", "v0.9"]
        for _ in range(50):
            text = " ".join(rng.choices(words, k=rng.randint(1, 12)))
            for path in extract_files_touched(text):
                assert path in text


class TestRoomId:
    def test_deterministic_equal_triples(self):
        a = room_id("concept", "pool_timeout", "proj")
        b = room_id("concept", "pool_timeout", "proj")
        assert a == b
        assert a.bit_length() <= 64

    def test_distinct_components_distinct_ids(self):
        assert room_id("concept", "k", "p") != room_id("file", "k", "p")
        assert room_id("concept", "k", "p") != room_id("concept", "k2", "p")
        assert room_id("concept", "k", "p") != room_id("concept", "k", "p2")

    def test_no_collisions_on_10k_random_triples(self):
        rng = random.Random(7)
        triples = set()
        while len(triples) < 10_000:
            triples.add((
                rng.choice(("file", "concept", "workflow")),
                f"key{rng.randrange(10**9)}",
                f"proj{rng.randrange(100)}",
            ))
        ids = {room_id(*t) for t in triples}
        assert len(ids) == len(triples)

    def test_case_sensitive(self):
        assert room_id("concept", "Key", "p") != room_id("concept", "key", "p")


class TestDistillExchange:
    def test_success_with_static_provider(self):
        ex = make_exchange()
        provider = CallableProvider(lambda prompt: VALID_RESPONSE, "static")
        obj = distill_exchange(ex, provider)
        assert obj.exchange_core == "Raised the pool timeout."
        assert obj.distill_text == obj.exchange_core + "\n" + obj.specific_context
        assert obj.ref == ex.ref
        assert obj.files_touched == ["src/db.py"]
        assert obj.token_len > 0
        assert {r.room_key for r in obj.room_assignments} == {"pool_timeout", "src/db.py"}

    def test_retry_then_success(self):
        ex = make_exchange()
        calls = []

        def flaky(prompt):
            calls.append(1)
            return "garbage" if len(calls) < 3 else VALID_RESPONSE

        obj = distill_exchange(ex, CallableProvider(flaky), DistillConfig(attempts=3))
        assert obj.exchange_core and len(calls) == 3

    def test_failure_after_retries(self):
        ex = make_exchange()
        with pytest.raises(DistillFailure):
            distill_exchange(ex, CallableProvider(lambda p: "junk"),
                             DistillConfig(attempts=3))

    def test_corpus_failure_goes_to_skiplist(self):
        ex = make_exchange()
        objects, skips = distill_corpus([ex], CallableProvider(lambda p: "junk"),
                                        DistillConfig(attempts=2, workers=1))
        assert objects == []
        assert skips == [{"conversation_id": "c0", "ply_start": 0, "ply_end": 1,
                          "reason": skips[0]["reason"]}]

    def test_incomplete_excluded_by_default(self):
        ex = make_exchange()
        ex.incomplete = True
        objects, skips = distill_corpus([ex])
        assert objects == [] and skips == []


class TestFallbackDistiller:
    def _corpus(self):
        # every exchange-0 token except "connpool" recurs elsewhere, so
        # connpool is strictly rarest there
        exchanges = [
            make_exchange("Fix the connpool leak now.",
                          "Patched connpool retry in src/db.py.", conv="c0"),
            make_exchange("Fix the docs wording now.",
                          "Patched the intro in src/docs.py with retry examples.",
                          conv="c1"),
            make_exchange("Add tests for the parser leak.",
                          "Added parser tests for db in src/parser.py now.", conv="c2"),
        ]
        return exchanges

    def test_rarest_token_becomes_room_key(self):
        exchanges = self._corpus()
        fb = FallbackDistiller(exchanges)
        obj = fb.distill(exchanges[0])
        assert obj.room_assignments[0].room_key == "connpool"
        assert obj.room_assignments[0].room_type == "concept"
        # oracle: recompute argmax IDF by hand
        idf = idf_table([tokenize_for_index(e.text(), "okapi") for e in exchanges])
        toks = tokenize_for_index(exchanges[0].text(), "okapi")
        best = max(dict.fromkeys(toks), key=lambda t: idf[t])
        assert idf[obj.room_assignments[0].room_key] == idf[best]

    def test_context_line_contains_token(self):
        exchanges = self._corpus()
        fb = FallbackDistiller(exchanges)
        obj = fb.distill(exchanges[0])
        assert "connpool" in obj.specific_context.lower()

    def test_single_message_core_deduplicated(self):
        ex = Exchange(conversation_id="c9", project_id="p", ply_start=0, ply_end=0,
                      messages=[msg("user", "Only one sentence here.", conv="c9")])
        fb = FallbackDistiller([ex])
        obj = fb.distill(ex)
        assert obj.exchange_core == "Only one sentence here."

    def test_deterministic(self):
        exchanges = self._corpus()
        a = FallbackDistiller(exchanges).distill(exchanges[0])
        b = FallbackDistiller(exchanges).distill(exchanges[0])
        assert a == b

    def test_core_from_first_user_and_last_assistant(self):
        exchanges = self._corpus()
        obj = FallbackDistiller(exchanges).distill(exchanges[0])
        assert obj.exchange_core == ("Fix the connpool leak now. "
                                     "Patched connpool retry in src/db.py.")


class TestBm25Document:
    def _obj(self):
        return DistilledObject(
            exchange_core="Fixed the retry loop.",
            specific_context="max_retries=5",
            room_assignments=[RoomAssignment.make(
                "concept", "retry_loop", "Retry loop", 1.0, "p")],
            files_touched=["src/a.py", "src/b.py"],
            conversation_id="c0", ply_start=0, ply_end=1, project_id="p",
        )

    def test_core_only_is_distill_text(self):
        obj = self._obj()
        assert build_bm25_document(obj, ("core",)) == obj.distill_text

    def test_core_files_concatenation(self):
        obj = self._obj()
        assert build_bm25_document(obj, ("core", "files")) == \
            obj.distill_text + " src/a.py src/b.py"

    def test_all_facets_include_rooms(self):
        obj = self._obj()
        doc = build_bm25_document(obj, ("core", "files", "rooms"))
        assert "retry_loop" in doc and "Retry loop" in doc

    def test_unknown_facet(self):
        with pytest.raises(ValueError):
            build_bm25_document(self._obj(), ("core", "bogus"))


class TestObjectStore:
    def test_round_trip_with_header(self, tmp_path, small_corpus):
        _, _, objects = small_corpus
        path = tmp_path / "objects.jsonl"
        write_objects(objects[:10], path)
        first = path.read_text(encoding="utf-8").splitlines()[0]
        assert json.loads(first) == {"format": "palace-object", "version": 1}
        back = read_objects(path)
        assert back == objects[:10]

    def test_distill_text_reconstruction(self, tmp_path, small_corpus):
        _, _, objects = small_corpus
        path = tmp_path / "objects.jsonl"
        write_objects(objects, path)
        for obj in read_objects(path):
            assert obj.distill_text == f"{obj.exchange_core}\n{obj.specific_context}"

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"format": "something-else", "version": 1}\n', encoding="utf-8")
        with pytest.raises(ValueError):
            read_objects(path)

    def test_room_count_invariant(self):
        with pytest.raises(ValueError):
            DistilledObject(
                exchange_core="c", specific_context="s", room_assignments=[],
                files_touched=[], conversation_id="c0", ply_start=0, ply_end=1,
                project_id="p",
            )

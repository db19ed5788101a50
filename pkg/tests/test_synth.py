from convmem.corpus import SegmentConfig, segment_corpus
from convmem.synth import generate_corpus


class TestGenerator:
    def test_deterministic_per_seed(self):
        a = generate_corpus(n_exchanges=50, n_queries=10, seed=5)
        b = generate_corpus(n_exchanges=50, n_queries=10, seed=5)
        assert a.messages == b.messages
        assert a.queries == b.queries
        c = generate_corpus(n_exchanges=50, n_queries=10, seed=6)
        assert a.messages != c.messages

    def test_segmentation_reproduces_planted_refs(self):
        synth = generate_corpus(n_exchanges=200, n_queries=20, seed=1)
        exchanges = segment_corpus(synth.messages, SegmentConfig())
        complete = [ex for ex in exchanges if not ex.incomplete]
        assert len(complete) == synth.n_exchanges == 200
        assert sorted(ex.ref for ex in complete) == sorted(synth.exchange_refs)

    def test_no_exchange_filtered_at_default_min_chars(self):
        synth = generate_corpus(n_exchanges=100, n_queries=10, seed=2)
        exchanges = segment_corpus(synth.messages, SegmentConfig(min_chars=200))
        assert sum(1 for ex in exchanges if not ex.incomplete) == 100

    def test_incomplete_exchanges_planted(self):
        synth = generate_corpus(n_exchanges=400, n_queries=10, seed=2)
        exchanges = segment_corpus(synth.messages, SegmentConfig())
        incomplete = [ex for ex in exchanges if ex.incomplete]
        assert incomplete, "expected some trailing unanswered exchanges"
        assert all(ex.ref not in set(synth.exchange_refs) for ex in incomplete)

    def test_queries_reference_real_exchanges(self):
        synth = generate_corpus(n_exchanges=80, n_queries=15, seed=3)
        refs = set(synth.exchange_refs)
        for q in synth.queries:
            assert q.target_ref in refs
            assert q.query_type in ("conceptual", "phrase", "exact_term")

    def test_exact_queries_tokens_planted_in_target(self):
        synth = generate_corpus(n_exchanges=60, n_queries=12, seed=4)
        exchanges = {ex.ref: ex for ex in segment_corpus(synth.messages, SegmentConfig())}
        for q in synth.queries:
            if q.query_type != "exact_term":
                continue
            text = exchanges[q.target_ref].text()
            for token in q.text.split():
                assert token in text

    def test_project_mix(self):
        synth = generate_corpus(n_exchanges=300, n_queries=10, seed=5)
        projects = {m.project_id for m in synth.messages}
        assert projects == {"alpha", "beta", "gamma"}

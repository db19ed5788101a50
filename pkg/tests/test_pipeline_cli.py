import json
from pathlib import Path

import pytest

from convmem.cli import main
from convmem.config import ConfigFileError, PipelineConfig
from convmem import pipeline


@pytest.fixture(scope="module")
def pipeline_store(tmp_path_factory):
    """Small store taken through every batch step once."""
    store = tmp_path_factory.mktemp("store")
    cfg = PipelineConfig(store_dir=str(store))
    pipeline.step_synth(cfg, n_exchanges=60, n_queries=9, seed=7)
    ingest = pipeline.step_ingest(cfg)
    pipeline.step_distill(cfg)
    pipeline.step_index(cfg)
    sweep = pipeline.step_sweep(cfg, "evaluated")
    pipeline.step_grade(cfg)
    pipeline.step_consensus(cfg)
    report = pipeline.step_report(cfg)
    return cfg, {"ingest": ingest, "sweep": sweep, "report": report}


class TestConfigFile:
    def test_round_trip(self, tmp_path):
        cfg = PipelineConfig(store_dir="s", k=9)
        path = tmp_path / "cfg.json"
        cfg.write(path)
        back = PipelineConfig.from_file(path)
        assert back == cfg

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"store_dir": "s", "mystery_knob": 4}', encoding="utf-8")
        with pytest.raises(ConfigFileError):
            PipelineConfig.from_file(path)

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{nope", encoding="utf-8")
        with pytest.raises(ConfigFileError):
            PipelineConfig.from_file(path)


class TestPipelineSteps:
    def test_ingest_matches_synth_ground_truth(self, pipeline_store):
        cfg, out = pipeline_store
        meta = json.loads((Path(cfg.store_dir) / "synth_meta.json").read_text())
        store_lines = (Path(cfg.store_dir) / "exchanges.jsonl").read_text().splitlines()
        complete = sum(1 for line in store_lines
                       if not json.loads(line)["incomplete"])
        assert complete == meta["n_exchanges"] == 60
        assert out["ingest"]["n_exchanges"] == len(store_lines)

    def test_sweep_covers_evaluated_space(self, pipeline_store):
        cfg, out = pipeline_store
        assert out["sweep"]["n_configs"] == 118
        runs = (Path(cfg.store_dir) / "runs.tsv").read_text().splitlines()
        config_ids = {line.split("\t")[1] for line in runs}
        assert len(config_ids) == 118

    def test_report_contents(self, pipeline_store):
        cfg, out = pipeline_store
        report = json.loads((Path(cfg.store_dir) / "report" / "report.json").read_text())
        assert len(report["metrics"]) == 118
        assert report["comparisons"]["n_rows"] == 40
        assert report["comparisons"]["bonferroni_alpha"] == pytest.approx(0.00125)
        assert report["vocab_survival"]["identity_control_survival_rate"] == 1.0
        assert report["corpus_stats"]["ratio_from_totals"] > 0
        assert report["run_config"]["seed"] == cfg.seed
        mrrs = [m["mrr"] for m in report["metrics"]]
        assert mrrs == sorted(mrrs, reverse=True)

    def test_grading_store_append_only_and_immutable_runs(self, pipeline_store):
        cfg, _ = pipeline_store
        runs_before = (Path(cfg.store_dir) / "runs.tsv").read_bytes()
        grades_before = (Path(cfg.store_dir) / "grades.jsonl").read_bytes()
        pipeline.step_consensus(cfg)  # reruns must not mutate run files
        assert (Path(cfg.store_dir) / "runs.tsv").read_bytes() == runs_before
        # re-grading resumes: nothing new to add, nothing rewritten
        again = pipeline.step_grade(cfg)
        assert again["n_records"] == 0
        assert again["n_already_graded"] > 0
        assert (Path(cfg.store_dir) / "grades.jsonl").read_bytes() == grades_before

    def test_lock_guards_store(self, pipeline_store):
        cfg, _ = pipeline_store
        lock = Path(cfg.store_dir) / ".lock"
        lock.write_text("held")
        try:
            with pytest.raises(pipeline.StoreLockedError):
                pipeline.step_index(cfg)
        finally:
            lock.unlink()


class TestProviderResolution:
    def test_env_var_overrides_distill_command(self, monkeypatch):
        script = ("import sys, json; sys.stdin.read(); "
                  "print(json.dumps({'exchange_core': 'From the env provider.', "
                  "'specific_context': 'env=1', 'room_assignments': "
                  "[{'room_type': 'concept', 'room_key': 'env'}]}))")
        monkeypatch.setenv("CONVMEM_DISTILL_CMD", f'python3 -c "{script}"')
        cfg = PipelineConfig(distill_provider="fallback")
        provider = pipeline._distill_provider(cfg)
        assert provider is not None
        out = provider.complete("ignored prompt")
        assert "From the env provider." in out

    def test_without_env_fallback_stays(self, monkeypatch):
        monkeypatch.delenv("CONVMEM_DISTILL_CMD", raising=False)
        assert pipeline._distill_provider(PipelineConfig()) is None


class TestSearchStep:
    def test_search_and_rerank(self, pipeline_store):
        cfg, _ = pipeline_store
        queries = (Path(cfg.store_dir) / "queries.jsonl").read_text().splitlines()
        q = json.loads(queries[0])
        out = pipeline.step_search(cfg, "full_text:bm25_okapi:passthrough", q["text"])
        assert out.entries
        reranked = pipeline.step_search(cfg, "full_text:bm25_okapi:passthrough",
                                        q["text"], rerank=True, lam=1.0)
        assert reranked.refs() == out.refs()


class TestCli:
    def test_no_args_usage_exit_2(self, capsys):
        assert main([]) == 2

    def test_unknown_subcommand_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_bad_config_file_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "cfg.json"
        bad.write_text('{"bogus_key": 1}', encoding="utf-8")
        assert main(["--config-file", str(bad), "synth"]) == 2
        err = capsys.readouterr().err
        assert "bogus_key" in json.loads(err.strip())["error"]

    def test_synth_ingest_search_flow(self, tmp_path, capsys):
        store = str(tmp_path / "store")
        assert main(["--store", store, "synth", "--exchanges", "30",
                     "--queries", "6", "--seed", "2"]) == 0
        synth_out = json.loads(capsys.readouterr().out)
        assert synth_out["n_exchanges"] == 30
        assert main(["--store", store, "ingest"]) == 0
        ingest_out = json.loads(capsys.readouterr().out)
        assert ingest_out["n_exchanges"] == 30
        assert main(["--store", store, "distill"]) == 0
        capsys.readouterr()
        assert main(["--store", store, "search", "--config",
                     "full_text:bm25_okapi:passthrough", "--query",
                     "zq0001mark kv0001tag"]) == 0
        search_out = json.loads(capsys.readouterr().out)
        assert search_out["results"]

    def test_unknown_config_id_exit_2(self, tmp_path, capsys):
        store = str(tmp_path / "store")
        main(["--store", store, "synth", "--exchanges", "10", "--queries", "3"])
        main(["--store", store, "ingest"])
        main(["--store", store, "distill"])
        capsys.readouterr()
        rc = main(["--store", store, "search", "--config", "bogus:x:y",
                   "--query", "q"])
        assert rc == 2
        assert "bogus" in capsys.readouterr().err

    def test_missing_store_is_runtime_error(self, tmp_path, capsys):
        rc = main(["--store", str(tmp_path / "void"), "sweep"])
        assert rc == 1
        payload = json.loads(capsys.readouterr().err.strip())
        assert "error" in payload

import json

import pytest

from rumourweb.cli import main
from rumourweb.io_utils import read_stage_file


@pytest.fixture()
def run_dir(tmp_path):
    return tmp_path / "out"


def _base_args(run_dir, offline_corpus_path):
    return ["--out-dir", str(run_dir), "--backend", f"offline:{offline_corpus_path}"]


def _run_pipeline(run_dir, corpus_dir, offline_corpus_path, strategy="preprocessed"):
    base = _base_args(run_dir, offline_corpus_path)
    assert main([*base, "preprocess", "--corpus", str(corpus_dir)]) == 0
    assert main([*base, "build-queries", "--threads", str(run_dir / "threads.jsonl"),
                 "--strategy", strategy]) == 0
    assert main([*base, "search", "--queries", str(run_dir / "queries.jsonl")]) == 0
    assert main([*base, "select-sentences", "--threads", str(run_dir / "threads.jsonl"),
                 "--articles", str(run_dir / "articles.jsonl")]) == 0
    assert main([*base, "assemble", "--threads", str(run_dir / "threads.jsonl"),
                 "--articles", str(run_dir / "articles.jsonl")]) == 0
    assert main([*base, "stats", "--dataset", str(run_dir / "dataset.jsonl")]) == 0
    assert main([*base, "overlap", "--dataset", str(run_dir / "dataset.jsonl")]) == 0
    assert main([*base, "evaluate", "--dataset", str(run_dir / "dataset.jsonl")]) == 0


class TestPipeline:
    def test_each_stage_reads_previous_output(self, run_dir, corpus_dir, offline_corpus_path):
        _run_pipeline(run_dir, corpus_dir, offline_corpus_path)
        for name in ("threads", "queries", "articles", "sentences", "dataset",
                     "stats", "overlap", "report"):
            path = run_dir / f"{name}.jsonl"
            assert path.exists(), name
            header, records = read_stage_file(path)
            assert header["stage"] == name
            assert header["config_hash"]
            assert "seed" in header

    def test_dataset_has_all_threads(self, run_dir, corpus_dir, offline_corpus_path):
        _run_pipeline(run_dir, corpus_dir, offline_corpus_path)
        _, records = read_stage_file(run_dir / "dataset.jsonl")
        assert len(records) == 10
        assert all(r["complete"] for r in records)

    def test_score_retrieval(self, run_dir, corpus_dir, offline_corpus_path, capsys):
        base = _base_args(run_dir, offline_corpus_path)
        assert main([*base, "preprocess", "--corpus", str(corpus_dir)]) == 0
        assert main([*base, "build-queries", "--threads", str(run_dir / "threads.jsonl")]) == 0
        assert main([*base, "search", "--queries", str(run_dir / "queries.jsonl")]) == 0
        assert main([*base, "score-retrieval", "--threads", str(run_dir / "threads.jsonl"),
                     "--articles", str(run_dir / "articles.jsonl")]) == 0
        out = capsys.readouterr().out
        assert "url_words=" in out
        assert "ranking[" in out


class TestErrors:
    def test_missing_corpus_is_validation_error(self, run_dir, offline_corpus_path):
        code = main([*_base_args(run_dir, offline_corpus_path),
                     "preprocess", "--corpus", "/nonexistent"])
        assert code == 1

    def test_missing_offline_corpus_is_validation_error(self, run_dir, corpus_dir):
        code = main(["--out-dir", str(run_dir), "--backend", "offline:/nope.jsonl",
                     "preprocess", "--corpus", str(corpus_dir)])
        assert code == 1

    def test_bad_stage_file_is_validation_error(self, run_dir, offline_corpus_path, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text('{"schema_version": 42}\n')
        code = main([*_base_args(run_dir, offline_corpus_path),
                     "build-queries", "--threads", str(bad)])
        assert code == 1


class TestExternalPredictions:
    def test_evaluate_consumes_prediction_file(self, run_dir, corpus_dir, offline_corpus_path, tmp_path):
        base = _base_args(run_dir, offline_corpus_path)
        assert main([*base, "preprocess", "--corpus", str(corpus_dir)]) == 0
        assert main([*base, "build-queries", "--threads", str(run_dir / "threads.jsonl")]) == 0
        assert main([*base, "search", "--queries", str(run_dir / "queries.jsonl")]) == 0
        assert main([*base, "assemble", "--threads", str(run_dir / "threads.jsonl"),
                     "--articles", str(run_dir / "articles.jsonl")]) == 0
        _, entries = read_stage_file(run_dir / "dataset.jsonl")
        predictions = tmp_path / "external_predictions.jsonl"
        with open(predictions, "w") as fh:
            for r in entries:
                for i in range(5):
                    fh.write(json.dumps({
                        "thread_id": r["thread_id"], "pair_index": i,
                        "predicted_label": r["label"], "fold": r["event"],
                    }) + "\n")
        assert main([*base, "evaluate", "--dataset", str(run_dir / "dataset.jsonl"),
                     "--predictions", str(predictions)]) == 0
        _, report = read_stage_file(run_dir / "report.jsonl")
        assert report[0]["macro_f1"] == pytest.approx(1.0)


class TestConfigFile:
    def test_toml_config_with_flag_override(self, run_dir, corpus_dir, offline_corpus_path, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text(f'backend = "offline:{offline_corpus_path}"\nseed = 11\n')
        assert main(["--config", str(config), "--out-dir", str(run_dir),
                     "preprocess", "--corpus", str(corpus_dir)]) == 0
        header, _ = read_stage_file(run_dir / "threads.jsonl")
        assert header["seed"] == 11

    def test_unknown_config_key_rejected(self, run_dir, tmp_path):
        config = tmp_path / "run.toml"
        config.write_text('nonsense = true\n')
        assert main(["--config", str(config), "--out-dir", str(run_dir),
                     "stats", "--threads", "whatever.jsonl"]) == 1

import json

import pytest

from conftest import SMALL_CORPUS, write_jsonl
from fgr.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


@pytest.fixture
def corpus_path(tmp_path):
    return str(write_jsonl(tmp_path / "c.jsonl", SMALL_CORPUS))


def test_index_prints_manifest_path(capsys, corpus_path, tmp_path):
    code, out, _ = run_cli(capsys, "index", "--corpus", corpus_path,
                           "--out", str(tmp_path / "idx"), "--dim", "16")
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert summary["passages"] == len(SMALL_CORPUS)
    assert summary["manifest"].endswith("manifest.json")


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run_cli(capsys, "index", "--nonsense")
    assert code == 1
    assert "nonsense" in err or "Usage" in err


def test_missing_file_is_user_error(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "index", "--corpus", str(tmp_path / "absent.jsonl"),
                         "--out", str(tmp_path / "idx"))
    assert code == 1


def test_duplicate_id_is_user_error(capsys, tmp_path):
    rows = SMALL_CORPUS + [{"id": "cat", "text": "again"}]
    path = write_jsonl(tmp_path / "dup.jsonl", rows)
    code, _, err = run_cli(capsys, "index", "--corpus", str(path),
                           "--out", str(tmp_path / "idx"))
    assert code == 1
    assert "duplicate_id" in err


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, capsysbinary_disabled=None):
    """make-dataset -> index -> shared by the command tests below."""
    root = tmp_path_factory.mktemp("cli_pipeline")
    code = main(["make-dataset", "--out", str(root / "data"), "--seed", "3",
                 "--queries", "6", "--corpus-size", "40", "--dim", "16"])
    assert code == 0
    code = main(["index", "--corpus", str(root / "data" / "corpus.jsonl"),
                 "--out", str(root / "idx"), "--dim", "16", "--seed", "3"])
    assert code == 0
    return root


def test_train_is_deterministic(capsys, pipeline):
    args = ["train", "--data", str(pipeline / "data" / "dataset.jsonl"),
            "--embedder", str(pipeline / "data" / "embedder.json"),
            "--seed", "7", "--epochs", "3", "--h2", "8"]
    code_a, out_a, _ = run_cli(capsys, *args, "--out", str(pipeline / "a.fgrw"))
    code_b, out_b, _ = run_cli(capsys, *args, "--out", str(pipeline / "b.fgrw"))
    assert code_a == code_b == 0
    assert (pipeline / "a.fgrw").read_bytes() == (pipeline / "b.fgrw").read_bytes()


def test_eval_recall_runs(capsys, pipeline):
    code, out, _ = run_cli(capsys, "eval-recall", "--index", str(pipeline / "idx"),
                           "--queries", str(pipeline / "data" / "queries.jsonl"),
                           "--qrels", str(pipeline / "data" / "qrels.jsonl"),
                           "--k", "10")
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert 0.0 <= summary["recall_at_k"] <= 1.0
    assert summary["queries"] == 6


def test_eval_plausibility_runs(capsys, pipeline):
    code, out, _ = run_cli(capsys, "eval-plausibility", "--index", str(pipeline / "idx"),
                           "--queries", str(pipeline / "data" / "queries.jsonl"),
                           "--gold", str(pipeline / "data" / "gold.jsonl"),
                           "--h2", "8", "--threshold", "0.5")
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert summary["examples"] == 6


def test_annotate_with_mock_map(capsys, pipeline, tmp_path):
    gold = [json.loads(line) for line in open(pipeline / "data" / "gold.jsonl")]
    mock_map = tmp_path / "mock.jsonl"
    with open(mock_map, "w") as fh:
        for g in gold:
            fh.write(json.dumps({"pid": g["pid"], "spans": [g["span"]]}) + "\n")
    code, out, _ = run_cli(capsys, "annotate",
                           "--queries", str(pipeline / "data" / "queries.jsonl"),
                           "--corpus", str(pipeline / "data" / "corpus.jsonl"),
                           "--qrels", str(pipeline / "data" / "qrels.jsonl"),
                           "--mock-map", str(mock_map),
                           "--out", str(tmp_path / "ann.jsonl"))
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert summary["annotated"] == 6
    assert summary["unmatched_rate"] == 0.0


def test_annotate_requires_a_client(capsys, pipeline, tmp_path):
    code, _, err = run_cli(capsys, "annotate",
                           "--queries", str(pipeline / "data" / "queries.jsonl"),
                           "--corpus", str(pipeline / "data" / "corpus.jsonl"),
                           "--qrels", str(pipeline / "data" / "qrels.jsonl"),
                           "--out", str(tmp_path / "ann.jsonl"))
    assert code == 1
    assert "endpoint" in err


def test_bench_writes_report(capsys, pipeline, tmp_path):
    code, out, _ = run_cli(capsys, "bench", "--index", str(pipeline / "idx"),
                           "--queries", str(pipeline / "data" / "queries.jsonl"),
                           "--k", "5", "--reps", "30", "--h2", "8",
                           "--max-queries", "2", "--out", str(tmp_path / "bench.json"))
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert summary["overhead_ratio"] > 0
    report = json.loads((tmp_path / "bench.json").read_text())
    assert report["reps"] == 30


def test_bench_kernels_summary(capsys):
    code, out, _ = run_cli(capsys, "bench-kernels", "--reps", "2")
    assert code == 0
    summary = json.loads(out.splitlines()[-1])
    assert "timings_ms" in summary

import json

import pytest

from signagent.cli import main


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    assert main(["synth-fixtures", "--out", str(out), "--seed", "4", "--glosses", "12", "--sentences", "3",
                 "--idgloss-glosses", "2"]) == 0
    return out


def tree_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_synth_is_byte_identical(corpus, tmp_path):
    main(["synth-fixtures", "--out", str(tmp_path), "--seed", "4", "--glosses", "12", "--sentences", "3",
          "--idgloss-glosses", "2"])
    assert tree_bytes(tmp_path) == tree_bytes(corpus)


def test_ingest_reports_counts(corpus, capsys):
    assert main(["ingest", "--manifest", str(corpus / "task1" / "manifest.jsonl")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["samples"] == 3 and report["dictionary_entries"] == 12


def test_pseudogloss_run_is_deterministic_and_evaluates(corpus, tmp_path):
    args = ["pseudogloss", "--manifest", str(corpus / "task1" / "manifest.jsonl"), "--resources", str(corpus)]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = tree_bytes(tmp_path / "a"), tree_bytes(tmp_path / "b")
    assert a == b and len([k for k in a if k.startswith("records/")]) == 3
    summary = json.loads(a["summary.json"])
    assert summary["status"] == {"valid": 3}
    report = tmp_path / "eval.json"
    assert main(["eval", "--records", str(tmp_path / "a" / "records"), "--references", str(tmp_path / "a" / "records"),
                 "--out", str(report)]) == 0
    combined = json.loads(report.read_text())["methods"]["a"]["subsets"]["combined"]
    assert combined["lcs_percent"] == 100.0
    assert main(["eval", "--records", str(tmp_path / "a" / "records"),
                 "--references", str(corpus / "task1" / "references.json")]) == 0


def test_idgloss_run_and_cluster_eval(corpus, tmp_path, capsys):
    out = tmp_path / "id"
    assert main(["idgloss", "--manifest", str(corpus / "task2" / "manifest.jsonl"), "--resources", str(corpus),
                 "--out", str(out)]) == 0
    assert json.loads((out / "summary.json").read_text())["status"] == {"valid": 2}
    capsys.readouterr()
    assert main(["eval", "--records", str(out / "records"), "--embeddings",
                 str(corpus / "task2" / "eval_embeddings.json")]) == 0
    table = capsys.readouterr().out
    assert "visual baseline" in table and "IDs/gloss" in table


def test_usage_errors_exit_2(corpus, tmp_path, capsys):
    manifest = str(corpus / "task1" / "manifest.jsonl")
    assert main(["pseudogloss", "--manifest", manifest, "--out", str(tmp_path), "--max-calls", "0",
                 "--resources", str(corpus)]) == 2
    assert main(["pseudogloss", "--manifest", manifest, "--out", str(tmp_path),
                 "--dictionary", str(tmp_path / "nope.json")]) == 2
    assert "--dictionary" in capsys.readouterr().err
    assert main(["pseudogloss", "--manifest", manifest, "--out", str(tmp_path), "--resources", str(corpus),
                 "--policy", "no-such-policy"]) == 2
    assert main(["eval", "--records", str(tmp_path / "missing")]) == 2
    (tmp_path / "empty").mkdir()
    assert main(["eval", "--records", str(tmp_path / "empty")]) == 3


def test_data_errors_exit_3(tmp_path, capsys):
    (tmp_path / "m.jsonl").write_text("{broken\n")
    assert main(["ingest", "--manifest", str(tmp_path / "m.jsonl")]) == 3
    assert "ParseError" in capsys.readouterr().err


def test_graph_query(corpus, capsys):
    assert main(["graph-query", "hand", "--radius", "0", "--resources", str(corpus)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["provenance"]["radius"] == 0 and doc["matched_nodes"]

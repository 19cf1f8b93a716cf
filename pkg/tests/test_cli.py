"""Command-line surface: flags, outputs, exit codes."""

import csv
import json

import pytest

from entrag.cli import main

from conftest import make_planted_corpus


@pytest.fixture()
def workspace(tmp_path):
    """Dataset JSONL, docs JSONL and mock-spec JSON for one planted corpus."""
    examples, spec = make_planted_corpus(4, seed=101)
    dataset = tmp_path / "data.jsonl"
    with open(dataset, "w") as fh:
        for ex in examples:
            fh.write(json.dumps({
                "id": ex.id,
                "question": ex.question,
                "answers": list(ex.answers),
                "documents": [
                    {
                        "title": d.title,
                        "text": d.content,
                        "score": d.retriever_score,
                        "is_oracle": d.is_oracle,
                    }
                    for d in ex.documents
                ],
            }) + "\n")
    docs = tmp_path / "docs.jsonl"
    with open(docs, "w") as fh:
        for d in examples[0].documents:
            fh.write(json.dumps({
                "title": d.title, "text": d.content,
                "score": d.retriever_score, "is_oracle": d.is_oracle,
            }) + "\n")
    spec_path = tmp_path / "mock.json"
    spec_path.write_text(json.dumps(spec.to_dict()))
    return {
        "tmp": tmp_path,
        "examples": examples,
        "dataset": str(dataset),
        "docs": str(docs),
        "spec": str(spec_path),
    }


def _common(ws):
    return ["--backend", "mock", "--mock-spec", ws["spec"], "--max-new-tokens", "24"]


def test_decode_single_question(workspace, capsys):
    ex = workspace["examples"][0]
    rc = main([
        "decode", "--method", "leens", "--question", ex.question,
        "--docs", workspace["docs"], *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["answer"] == ex.answers[0]
    assert payload["stop_reason"] == "newline"
    assert payload["config"]["method"] == "leens"
    assert payload["config"]["backend"]["kind"] == "mock"


def test_decode_from_dataset_by_id(workspace, capsys):
    ex = workspace["examples"][2]
    rc = main([
        "decode", "--dataset", workspace["dataset"], "--id", ex.id,
        "--method", "clehe", "--beta", "0.25", *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["answer"] == ex.answers[0]


def test_decode_missing_question_is_usage_error(workspace, capsys):
    rc = main(["decode", "--docs", workspace["docs"], *_common(workspace)])
    assert rc == 2
    err = json.loads(capsys.readouterr().err)
    assert "question" in err["error"]["message"]


def test_decode_unknown_dataset_id(workspace, capsys):
    rc = main([
        "decode", "--dataset", workspace["dataset"], "--id", "zzz", *_common(workspace),
    ])
    assert rc == 2


def test_clehe_beta_zero_matches_leens_answer(workspace, capsys):
    ex = workspace["examples"][1]
    answers = {}
    for method, beta in (("clehe", "0"), ("leens", "0")):
        rc = main([
            "decode", "--method", method, "--beta", beta,
            "--question", ex.question, "--docs", workspace["docs"],
            *_common(workspace),
        ])
        assert rc == 0
        answers[method] = json.loads(capsys.readouterr().out)["answer"]
    assert answers["clehe"] == answers["leens"]


def test_decode_trace_flag(workspace, capsys):
    ex = workspace["examples"][0]
    rc = main([
        "decode", "--question", ex.question, "--docs", workspace["docs"],
        "--trace", *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["trace"]
    assert {"step", "token_id", "entropy", "top5"} <= set(payload["trace"][0])


def test_decode_out_file(workspace, tmp_path, capsys):
    ex = workspace["examples"][0]
    out = tmp_path / "result.json"
    rc = main([
        "decode", "--question", ex.question, "--docs", workspace["docs"],
        "--out", str(out), *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(out.read_text())
    assert payload["answer"] == ex.answers[0]


def test_eval_writes_records_and_prints_aggregate(workspace, tmp_path, capsys):
    records = tmp_path / "records.jsonl"
    rc = main([
        "eval", "--dataset", workspace["dataset"], "--method", "leens",
        "--out", str(records), *_common(workspace),
    ])
    assert rc == 0
    agg = json.loads(capsys.readouterr().out)
    assert agg["em"] == 100.0
    assert agg["num_total"] == 4
    assert agg["config"]["dataset"] == workspace["dataset"]
    lines = records.read_text().strip().split("\n")
    assert len(lines) == 4


def test_eval_requires_dataset(workspace, capsys):
    rc = main(["eval", *_common(workspace)])
    assert rc == 2


def test_eval_replug_without_scores_fails_runtime(workspace, tmp_path, capsys):
    rows = []
    with open(workspace["dataset"]) as fh:
        for line in fh:
            row = json.loads(line)
            for doc in row["documents"]:
                doc.pop("score", None)
            rows.append(row)
    unscored = tmp_path / "unscored.jsonl"
    with open(unscored, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    rc = main([
        "eval", "--dataset", str(unscored), "--method", "replug", *_common(workspace),
    ])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "InvalidScoreError"


def test_eval_ingestion_error_reports_line(workspace, tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "a"}\n')
    rc = main(["eval", "--dataset", str(bad), *_common(workspace)])
    assert rc == 1
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "IngestionError"
    assert ":1" in err["error"]["message"]


def test_sweep_emits_csv(workspace, tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    rc = main([
        "sweep", "--dataset", workspace["dataset"], "--method", "leens",
        "--out", str(out), *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["num_positions"] == 4
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["position", "em"]
    assert len(rows) == 5
    assert all(r[1] == "100.0" for r in rows[1:])


def test_analyze_entropy_gap(workspace, tmp_path, capsys):
    out = tmp_path / "gap.csv"
    rc = main([
        "analyze", "--analysis", "entropy-gap", "--dataset", workspace["dataset"],
        "--out", str(out), *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert all(row["gap"] < 0 for row in payload["rows"])
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "id"
    assert len(rows) == 5


def test_analyze_layer_profile(workspace, capsys):
    rc = main([
        "analyze", "--analysis", "layer-profile", "--dataset", workspace["dataset"],
        "--layers", "2,5,8", *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert [r["layer"] for r in payload["rows"]] == [2, 5, 8]


def test_config_file_supplies_defaults_flags_override(workspace, tmp_path, capsys):
    ex = workspace["examples"][0]
    toml = tmp_path / "run.toml"
    toml.write_text(
        f'method = "naive"\nmax_new_tokens = 24\nmock_spec = "{workspace["spec"]}"\n'
    )
    rc = main([
        "decode", "--config", str(toml), "--method", "leens",
        "--question", ex.question, "--docs", workspace["docs"],
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["config"]["method"] == "leens"
    assert payload["config"]["max_new_tokens"] == 24


def test_preset_flag_sets_hyperparameters(workspace, capsys):
    ex = workspace["examples"][0]
    rc = main([
        "decode", "--preset", "llama2-7b", "--method", "leens",
        "--question", ex.question, "--docs", workspace["docs"],
        "--backend", "mock", "--mock-spec", workspace["spec"],
        "--max-new-tokens", "24",
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["config"]["tau"] == 0.1
    assert payload["config"]["beta"] == 5.0


def test_remote_backend_requires_base_url(workspace, capsys):
    rc = main([
        "decode", "--backend", "remote", "--question", "q", "--docs", workspace["docs"],
    ])
    assert rc == 2


def test_layer_strategy_flag_fixed(workspace, capsys):
    ex = workspace["examples"][0]
    rc = main([
        "decode", "--method", "clehe", "--layer-strategy", "fixed:3",
        "--question", ex.question, "--docs", workspace["docs"], *_common(workspace),
    ])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["config"]["layer_strategy"]["kind"] == "fixed"
    assert payload["config"]["layer_strategy"]["fixed_layer"] == 3


def test_bad_layer_strategy_is_usage_error(workspace, capsys):
    rc = main([
        "decode", "--layer-strategy", "psychic", "--question", "q",
        "--docs", workspace["docs"], *_common(workspace),
    ])
    assert rc == 2

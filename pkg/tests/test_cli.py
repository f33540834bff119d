from __future__ import annotations

import json
import os

import pytest

from lexeval.annotate import WordAnnotation, write_annotations
from lexeval.cli import dispatch
from lexeval.llm.backends import API_KEY_ENV

from oracles import synthetic_essays, write_essay_inputs

HAND_GOLD = """# doc_id = hand
The\tthe\tdeterminer\tS
cat\tcat\tnoun\tA1
sat\tsit\tverb\tA2
on\ton\tpreposition\tS
mat\tmat\tnoun\tB1
.\t.\tother\tP
"""

HAND_PRED = [
    ("the", "S", "unknown", None),
    ("cat", "A1", "ambiguous", "cat-1"),
    ("sit", "B1", "non_ambiguous", "sit-1"),
    ("on", "S", "unknown", None),
    ("mat", "B1", "ambiguous", "mat-1"),
    (".", "P", "unknown", None),
]


def run(*argv):
    return dispatch([str(a) for a in argv])


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def essays(tmp_path):
    records, scores = synthetic_essays(n_per_level=4, seed=3)
    return write_essay_inputs(tmp_path, records, scores)


def test_eval_words_from_predictions_matches_hand_counts(tmp_path):
    gold = tmp_path / "hand.tsv"
    gold.write_text(HAND_GOLD)
    pred = tmp_path / "pred.jsonl"
    write_annotations(
        [WordAnnotation("hand", 0, i, lem, lem, lab, "pos", amb, eid) for i, (lem, lab, amb, eid) in enumerate(HAND_PRED)],
        pred,
    )
    out = tmp_path / "out"
    assert run("eval-words", "--gold", gold, "--pred", pred, "--out", out) == 0
    res = read_json(out / "results.json")["methods"]["pos"]
    assert res["accuracy"] == {"ambiguous": 1.0, "non_ambiguous": 0.0, "all": pytest.approx(2 / 3)}
    f1 = res["per_label"]["all"]
    assert f1["A1"]["f1"] == 1.0
    assert f1["A2"]["f1"] == 0.0 and f1["A2"]["support"] == 1
    assert f1["B1"]["f1"] == pytest.approx(2 / 3)
    assert not f1["C2"]["supported"]
    assert (out / "tables" / "word_accuracy.tsv").exists()


def test_annotate_writes_annotations_and_manifest(tmp_path, gold_path):
    out = tmp_path / "out"
    assert run("annotate", "--in", gold_path, "--method", "pos", "--out", out) == 0
    lines = (out / "annotations.jsonl").read_text().splitlines()
    assert json.loads(lines[0])["method"] == "pos"
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "annotate"
    assert "annotations.jsonl" in manifest["outputs"]
    assert manifest["backend"] == "none"


def test_eval_words_with_oracle_backend(tmp_path, gold_path):
    out = tmp_path / "out"
    assert run("eval-words", "--gold", gold_path, "--method", "llm,pos", "--backend", "mock-oracle", "--out", out) == 0
    res = read_json(out / "results.json")
    assert res["methods"]["llm"]["accuracy"]["all"] == 1.0
    assert res["meta"]["backend"] == "mock-oracle"


def test_missing_api_key_is_a_usage_error(tmp_path, gold_path, monkeypatch, capsys):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    rc = run("annotate", "--in", gold_path, "--method", "llm", "--model", "m", "--out", tmp_path / "o")
    assert rc == 2
    assert API_KEY_ENV in capsys.readouterr().err


def test_http_backend_needs_a_model(tmp_path, monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "k")
    assert run("semantic-eval", "--out", tmp_path / "o") == 2


def test_unknown_flag_and_bad_values_are_usage_errors(tmp_path, gold_path):
    assert run("annotate", "--bogus") == 2
    assert run("annotate", "--in", gold_path, "--method", "psychic", "--out", tmp_path / "o") == 2
    assert run("stats", "--format", "pdf", "--out", tmp_path / "o") == 2


def test_runtime_failure_exits_one(tmp_path, capsys):
    assert run("annotate", "--in", tmp_path / "missing.tsv", "--method", "pos", "--out", tmp_path / "o") == 1
    assert "failed" in capsys.readouterr().err


def test_output_may_not_overwrite_input(tmp_path, gold_path):
    out = tmp_path / "out"
    assert run("annotate", "--in", gold_path, "--method", "pos", "--out", out) == 0
    assert run("eval-words", "--gold", gold_path, "--pred", out / "annotations.jsonl", "--out", out) == 2


def test_show_config_and_precedence(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"seed": 5, "jobs": 2, "method": "pos"}))
    assert run("annotate", "--config", config, "--seed", 9, "--show-config") == 0
    shown = json.loads(capsys.readouterr().out)
    assert shown["seed"] == 9  # flag beats file
    assert shown["jobs"] == 2  # file beats default
    assert shown["format"] == "json,tsv"  # default


def test_config_file_with_unknown_key(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"sed": 5}))
    assert run("stats", "--config", config, "--out", tmp_path / "o") == 2


def test_semantic_eval_reruns_are_byte_identical_and_cached(tmp_path):
    cache = tmp_path / "cache.jsonl"
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert run("semantic-eval", "--backend", "mock-uniform", "--cache", cache, "--out", out, "--format", "json,tsv,html") == 0
    for name in ("results.json", "report.html", "tables/semantic_accuracy.tsv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    first, second = read_json(outs[0] / "manifest.json"), read_json(outs[1] / "manifest.json")
    assert first["cache_misses"] > 0 and second["cache_misses"] == 0
    assert second["cache_hits"] == first["cache_hits"] + first["cache_misses"]


def test_essay_commands(tmp_path, essays):
    ann, scores = essays
    out = tmp_path / "eval"
    assert run("essay-eval", "--in", ann, "--scores", scores, "--method", "pos", "--out", out, "--format", "json,tsv,html") == 0
    res = read_json(out / "results.json")
    assert res["naive"]["holistic"]["pcc"] > 0.8
    html = (out / "report.html").read_text()
    assert 'id="plot-data"' in html
    assert run("essay-features", "--in", ann, "--method", "pos", "--out", tmp_path / "f") == 0
    assert len((tmp_path / "f" / "features.jsonl").read_text().splitlines()) == 24
    assert run("distribution", "--in", ann, "--scores", scores, "--method", "pos", "--out", tmp_path / "d") == 0
    assert run("consistency", "--in", ann, "--scores", scores, "--method", "pos", "--words", "work", "--out", tmp_path / "c") == 0
    assert run("consistency", "--in", ann, "--scores", scores, "--method", "pos", "--words", "nope", "--out", tmp_path / "c2") == 1


def test_report_marks_missing_data(tmp_path):
    results = tmp_path / "in" / "results.json"
    results.parent.mkdir()
    results.write_text(json.dumps({"meta": {"seed": 0}, "tables": {"t": {"columns": ["a"], "rows": []}}, "plots": {}}))
    out = tmp_path / "out"
    assert run("report", "--results", results, "--out", out, "--format", "html") == 0
    html = (out / "report.html").read_text()
    assert 'id="no-data"' in html


def test_ingest_and_stats(tmp_path, capsys):
    assert run("ingest", "--stats", "--out", tmp_path / "i") == 0
    printed = capsys.readouterr().out
    assert "entries" in printed and "ambiguous by PoS" in printed
    assert (tmp_path / "i" / "lexicon.jsonl").exists()
    assert run("stats", "--out", tmp_path / "s") == 0
    res = read_json(tmp_path / "s" / "results.json")
    assert sum(v for _, v in res["tables"]["polysemy"]["rows"]) == pytest.approx(100.0)


def test_keep_partial_on_failure(tmp_path, gold_path, stub_server, stub_url, monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "k")
    stub_server.failures = [400] * 10_000  # client errors are not retried
    out = tmp_path / "out"
    rc = run("annotate", "--in", gold_path, "--method", "llm", "--model", "m", "--api-base", stub_url,
             "--keep-partial", "--jobs", 1, "--out", out)
    assert rc == 1
    assert os.path.exists(out / "annotations.partial.jsonl")

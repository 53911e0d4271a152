import json

import pytest

from truthval.cli import main
from truthval.pipeline import data_path

KG = str(data_path("geo_kg.tsv"))
ONT = str(data_path("geo.ont"))
MATCH = str(data_path("geo_match.tsv"))


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("models")
    assert main(["train", "--kg", KG, "--output", str(out)]) == 0
    return out


def _verify(model_dir, *triplet, extra=()):
    return main(["verify", "--kg", KG, "--model", str(model_dir / "OfficeLocationInUS.pra"),
                 "--ontology", ONT, "--match-table", MATCH, *extra, *triplet])


def test_train_writes_one_model_per_relation(model_dir):
    assert sorted(p.name for p in model_dir.iterdir()) == ["HeadquarteredIn.pra",
                                                          "OfficeLocationInUS.pra"]


def test_verify_false_with_evidence(model_dir, tmp_path):
    out = tmp_path / "r.json"
    code = _verify(model_dir, "Google", "OfficeLocationInUS", "Minneapolis",
                   extra=["--output", str(out)])
    assert code == 3
    report = json.loads(out.read_text())
    assert report["evidence"]["cardinality"] == 5


def test_verify_true(model_dir, capsys):
    assert _verify(model_dir, "Google", "OfficeLocationInUS", "Atlanta") == 0
    assert json.loads(capsys.readouterr().out)["label"] == "true"


def test_verify_false_without_evidence(model_dir, tmp_path):
    empty = tmp_path / "empty.tsv"
    empty.write_text("# no matches\n")
    code = main(["verify", "--kg", KG, "--model", str(model_dir / "OfficeLocationInUS.pra"),
                 "--ontology", ONT, "--match-table", str(empty), "--output",
                 str(tmp_path / "r.json"), "Google", "OfficeLocationInUS", "Minneapolis"])
    assert code == 4


def test_missing_model_exit_code(capsys):
    code = main(["verify", "--kg", KG, "--ontology", ONT, "--match-table", MATCH,
                 "Google", "OfficeLocationInUS", "Minneapolis"])
    assert code == 2
    assert "no PRA model" in capsys.readouterr().err


def test_malformed_input_exit_code(tmp_path, model_dir, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("only\ttwo\n")
    assert main(["ingest", "--kg", str(bad)]) == 1
    assert "bad.tsv:1" in capsys.readouterr().err
    bad_ont = tmp_path / "bad.ont"
    bad_ont.write_text("isa A B\nisa B A\n")
    assert _verify(model_dir, "Google", "OfficeLocationInUS", "Minneapolis",
                   extra=["--ontology", str(bad_ont)]) == 1
    assert main(["verify", "Google", "OfficeLocationInUS", "Minneapolis"]) == 1


def test_ingest_round_trip(tmp_path):
    out = tmp_path / "kg.tsv"
    assert main(["ingest", "--kg", KG, "--output", str(out)]) == 0
    again = tmp_path / "kg2.tsv"
    assert main(["ingest", "--kg", str(out), "--output", str(again)]) == 0
    assert out.read_text() == again.read_text()


def test_filter_kg(tmp_path, model_dir):
    out = tmp_path / "kept.tsv"
    code = main(["filter-kg", "--kg", KG, "--model", str(model_dir / "OfficeLocationInUS.pra"),
                 "--top-fraction", "0.5", "--output", str(out)])
    assert code == 0
    kept = [ln for ln in out.read_text().splitlines() if ln]
    assert 0 < len(kept) < 29


def test_classify_dot(capsys):
    assert main(["classify", "--ontology", ONT]) == 0
    base = capsys.readouterr().out
    assert main(["classify", "--ontology", ONT, "--augment"]) == 0
    full = capsys.readouterr().out
    assert base.startswith('digraph "geo"') and "¬" not in base
    assert "¬California" in full


def test_evidence_command(capsys):
    code = main(["evidence", "--ontology", ONT, "--target", "Minneapolis",
                 "Atlanta", "Austin", "Chicago"])
    assert code == 0
    res = json.loads(capsys.readouterr().out)
    assert res["evidence"]["concepts"] == ["Illinois", "South_region"]


def test_eval_command(tmp_path, model_dir, capsys):
    held = tmp_path / "held.tsv"
    held.write_text("Google\tOfficeLocationInUS\tAtlanta\n")
    assert main(["eval", "--kg", KG, "--model", str(model_dir / "OfficeLocationInUS.pra"),
                 "--held-out", str(held)]) == 0
    res = json.loads(capsys.readouterr().out)
    assert 0 <= res["OfficeLocationInUS"]["mrr"] <= 1


def test_stats_command(model_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    _verify(model_dir, "Google", "OfficeLocationInUS", "Minneapolis", extra=["--output", str(out)])
    assert main(["stats", "--text", str(out)]) == 0
    assert "compression" in capsys.readouterr().out
    assert main(["stats", str(out)]) == 0
    assert json.loads(capsys.readouterr().out)["compression"] == 22 / 5


def test_config_flag_overrides_file(tmp_path, model_dir):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("exact_cover_limit = 1\n")
    out = tmp_path / "r.json"
    _verify(model_dir, "Google", "OfficeLocationInUS", "Minneapolis",
            extra=["--config", str(cfg), "--output", str(out)])
    assert json.loads(out.read_text())["evidence"]["solver"] == "greedy"
    _verify(model_dir, "Google", "OfficeLocationInUS", "Minneapolis",
            extra=["--config", str(cfg), "--exact-cover-limit", "24", "--output", str(out)])
    assert json.loads(out.read_text())["evidence"]["solver"] == "exact"

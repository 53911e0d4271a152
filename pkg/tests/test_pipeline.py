import json
import random
import time

import jsonschema
import pytest

from truthval.evidence import verify_evidence
from truthval.kg import Triplet
from truthval.ontology import OntologyError, parse_ontology
from truthval.pipeline import (EXIT_FALSE_NO_EVIDENCE, EXIT_FALSE_WITH_EVIDENCE, EXIT_TRUE,
                               ConceptMatchTable, Config, MissingModelError, data_path,
                               format_stats, match_concept, report_stats, run_pipeline)
from truthval.synthetic import false_triplet_corpus

from conftest import GEO_CITIES

MINNEAPOLIS = Triplet("Google", "OfficeLocationInUS", "Minneapolis")

ORG_ONT = """ontology org
isa Target_Corporation Minnesota_company
isa US_Bancorp Minnesota_company
isa Xcel_Energy Minnesota_company
isa Minnesota_company Company
isa Google_Inc California_company
isa California_company Company
"""
ORG_MATCH = {("Google", "org"): "Google_Inc", ("Target Corporation", "org"): "Target_Corporation",
             ("U.S. Bancorp", "org"): "US_Bancorp", ("Xcel Energy", "org"): "Xcel_Energy"}


@pytest.fixture(scope="module")
def models(geo_model):
    return {"OfficeLocationInUS": geo_model}


@pytest.fixture(scope="module")
def minneapolis_report(geo_kg, models, geo_bundle, geo_table):
    return run_pipeline(geo_kg, models, [geo_bundle], geo_table, MINNEAPOLIS)


def test_match_concept(geo_table):
    assert match_concept(geo_table, "Minneapolis", "geo") == "Minneapolis"
    assert match_concept(geo_table, "New York", "geo") == "New_York_City"
    assert match_concept(geo_table, "Atlantis", "geo") is None
    assert match_concept(geo_table, "Minneapolis", "org") is None


def test_match_table_format_errors():
    with pytest.raises(ValueError, match="<match table>:2:"):
        ConceptMatchTable.loads("a\tgeo\tA\nbroken line\n")


def test_match_table_validation(geo_kg, models, geo_bundle):
    table = ConceptMatchTable({("Minneapolis", "geo"): "Minneapolis_City"})
    with pytest.raises(OntologyError, match="Minneapolis_City"):
        run_pipeline(geo_kg, models, [geo_bundle], table, MINNEAPOLIS)


def test_config_file_and_overrides(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\nseed = 7\nmax-path-len=2\nomega_mode = exact\n")
    cfg = Config.load(f)
    assert (cfg.seed, cfg.max_path_len, cfg.omega_mode) == (7, 2, "exact")
    cfg = cfg.updated({"seed": 9, "top_fraction": None})
    assert cfg.seed == 9 and cfg.top_fraction == 0.1
    with pytest.raises(ValueError, match="line 1"):
        Config.from_text("colour = blue\n")


def test_running_example(minneapolis_report, geo_bundle, geo_city_concepts):
    r = minneapolis_report
    assert not r.label
    assert r.exit_code == EXIT_FALSE_WITH_EVIDENCE
    assert r.evidence.kind == "object" and r.evidence.ontology == "geo"
    assert r.evidence.cardinality == 5
    assert {c.entity for c in r.object_candidates} == set(GEO_CITIES)
    assert verify_evidence(geo_bundle.model, "Minneapolis", geo_city_concepts, r.evidence)
    assert r.truth_paths == []


def test_running_example_is_fast(geo_kg, models, geo_doc, geo_table):
    start = time.perf_counter()
    run_pipeline(geo_kg, models, [geo_doc], geo_table, MINNEAPOLIS)
    assert time.perf_counter() - start < 1.0


def test_known_triplet_is_true(geo_kg, models, geo_bundle, geo_table):
    r = run_pipeline(geo_kg, models, [geo_bundle], geo_table,
                     Triplet("Google", "OfficeLocationInUS", "Atlanta"))
    assert r.label and r.exit_code == EXIT_TRUE
    assert len(r.truth_paths) >= 1
    assert r.evidence is None and r.attempts == [] and r.object_candidates == []


def test_false_without_any_match(geo_kg, models, geo_bundle):
    r = run_pipeline(geo_kg, models, [geo_bundle], ConceptMatchTable(), MINNEAPOLIS)
    assert r.exit_code == EXIT_FALSE_NO_EVIDENCE
    assert r.evidence is None
    assert len(r.object_candidates) == 22
    assert "no matching ontology produced evidence" in r.warnings


def test_missing_model(geo_kg, geo_bundle, geo_table):
    with pytest.raises(MissingModelError):
        run_pipeline(geo_kg, {}, [geo_bundle], geo_table, MINNEAPOLIS)


def test_subject_evidence_wins_when_smaller(geo_kg, models, geo_bundle, geo_table):
    table = ConceptMatchTable({**geo_table.entries, **ORG_MATCH})
    org = parse_ontology(ORG_ONT)
    r = run_pipeline(geo_kg, models, [geo_bundle, org], table, MINNEAPOLIS)
    assert {c.entity for c in r.subject_candidates} == {
        "Target Corporation", "U.S. Bancorp", "Xcel Energy"}
    assert r.evidence.kind == "subject" and r.evidence.ontology == "org"
    assert r.evidence.concepts == ("Minnesota_company",)
    assert [(a.ontology, a.kind) for a in r.attempts] == [("geo", "object"), ("org", "subject")]


def test_unmatched_candidates_are_dropped(geo_kg, models, geo_bundle, geo_table):
    entries = {k: v for k, v in geo_table.entries.items() if k[0] != "Chicago"}
    r = run_pipeline(geo_kg, models, [geo_bundle], ConceptMatchTable(entries), MINNEAPOLIS)
    assert "Illinois" not in r.evidence.concepts and r.evidence.cardinality == 4
    assert any("Chicago" in w for w in r.warnings)


def test_report_is_deterministic(geo_kg, geo_doc, geo_table):
    from truthval.pra import train_pra
    outs = []
    for _ in range(2):
        m = train_pra(geo_kg, "OfficeLocationInUS", seed=5)
        outs.append(run_pipeline(geo_kg, {m.relation: m}, [geo_doc], geo_table,
                                 MINNEAPOLIS, Config(seed=5)).to_json())
    assert outs[0] == outs[1]


def test_report_matches_schema(minneapolis_report, geo_kg, models, geo_bundle, geo_table):
    schema = json.loads(data_path("report.schema.json").read_text())
    true_report = run_pipeline(geo_kg, models, [geo_bundle], geo_table,
                               Triplet("Google", "OfficeLocationInUS", "Atlanta"))
    for rep in (minneapolis_report, true_report):
        jsonschema.validate(json.loads(rep.to_json()), schema)


def test_report_self_consistency(minneapolis_report):
    d = json.loads(minneapolis_report.to_json())
    assert d["label"] == "false" and d["truth_paths"] == []
    assert d["outcome"] == "false-with-evidence" and d["exit_code"] == 3
    assert list(d) == sorted(d)


# ---------------------------------------------------------------- stats

def _fake(relation, label, n_obar=0, alpha=None):
    return {"triplet": {"subject": "s", "relation": relation, "object": "o"},
            "label": label, "object_candidates": [{}] * n_obar,
            "evidence": None if alpha is None else {"cardinality": alpha}}


def test_stats_compression_arithmetic():
    s = report_stats([_fake("r", "false", 10, 2)])
    assert s["compression"] == 5.0
    assert s["avg_object_candidates"] == 10 and s["avg_evidence"] == 2


def test_stats_recount():
    rng = random.Random(4)
    reports = [_fake(rng.choice(["a", "b", "c"]), rng.choice(["true", "false"]),
                     rng.randint(1, 20), rng.randint(1, 5)) for _ in range(20)]
    s = report_stats(reports)
    for row in s["relations"]:
        mine = [r for r in reports if r["triplet"]["relation"] == row["relation"]]
        assert row["count"] == len(mine)
        assert row["false_proportion"] == sum(r["label"] == "false" for r in mine) / len(mine)
    assert s["total"] == 20
    assert s["false"] == sum(r["label"] == "false" for r in reports)


def test_stats_text_columns(minneapolis_report):
    text = format_stats(report_stats([minneapolis_report]))
    header = text.splitlines()[0].split()
    assert header == ["relation", "count", "false_prop", "avg_Obar", "avg_alpha"]
    assert "OfficeLocationInUS" in text and "4.40" in text
    with pytest.raises(ValueError):
        report_stats([])


def test_synthetic_corpus_compresses():
    from truthval.pra import train_pra
    corpus = false_triplet_corpus(random.Random(2), n_triplets=10)
    m = train_pra(corpus.kg, corpus.relation)
    reports = [run_pipeline(corpus.kg, {m.relation: m}, [corpus.ontology],
                            ConceptMatchTable(corpus.match), t) for t in corpus.false_triplets]
    assert all(not r.label for r in reports)
    s = report_stats(reports)
    assert s["compression"] > 1

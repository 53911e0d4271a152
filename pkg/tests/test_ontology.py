import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from truthval.ontology import (BOTTOM, TOP, Kind, OntologyError, UnknownConceptError,
                               build_canonical_model, classify, is_subsumed, name_node,
                               parse_ontology)
from truthval.synthetic import random_ontology

from oracles import isa_closure, name_arcs, transitive_reduction


def test_parse_two_assertions():
    doc = parse_ontology("isa Minneapolis Minnesota\nisa Minnesota Midwest_region\n")
    assert doc.concepts == {"Minneapolis", "Minnesota", "Midwest_region"}
    assert len(doc.isa) == 2


def test_parse_empty_and_comments():
    doc = parse_ontology("# nothing here\n\n", default_id="x")
    assert doc.id == "x" and not doc.concepts and not doc.isa


@pytest.mark.parametrize("text, fragment", [
    ("isa A B\nisa B A\n", "cycle"),
    ("isa A A\n", "cycle"),
    ("concept A\noverlap A Z\n", "undeclared"),
    ("ontology a\nontology b\n", "duplicate ontology id"),
    ("subclass A B\n", "cannot parse"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(OntologyError, match=fragment):
        parse_ontology(text)


def test_parse_dedups_and_reads_overlaps():
    doc = parse_ontology("ontology o\nisa A B\nisa A B\nconcept C\noverlap C B\noverlap B C\n")
    assert doc.id == "o"
    assert doc.isa == {("A", "B")}
    assert doc.overlaps == {frozenset({"B", "C"})}


def test_single_concept_dag():
    dag = classify(parse_ontology("concept A"))
    assert dag.arcs == {(TOP, name_node("A")), (name_node("A"), BOTTOM)}


def test_diamond_drops_redundant_arc():
    doc = parse_ontology("isa D B\nisa D C\nisa B A\nisa C A\nisa D A\n")
    arcs = name_arcs(classify(doc))
    assert ("D", "A") not in arcs
    assert arcs == {("D", "B"), ("D", "C"), ("B", "A"), ("C", "A")}
    assert arcs == transitive_reduction(isa_closure(doc))


def test_geo_arcs(geo_bundle):
    dag = classify(geo_bundle.doc)
    arcs = name_arcs(dag)
    assert ("California", "West_region") in arcs
    assert ("Mountain_View", "USA") not in arcs
    assert ("Mountain_View", "Santa_Clara") in arcs and ("Santa_Clara", "California") in arcs


def test_geo_subsumption(geo_bundle):
    dag = geo_bundle.dag
    assert is_subsumed(dag, "Minneapolis", "Minnesota")
    assert is_subsumed(dag, "Minneapolis", "Minneapolis")
    assert not is_subsumed(dag, "Minnesota", "Minneapolis")
    assert is_subsumed(dag, "Minnesota", dag.negation("California"))
    with pytest.raises(UnknownConceptError):
        is_subsumed(dag, "Atlantis", "USA")


def test_every_node_between_top_and_bottom(geo_bundle):
    dag = geo_bundle.dag
    for n in dag.nodes:
        assert dag.reaches(TOP, n) and dag.reaches(n, BOTTOM)


def test_dot_output(geo_bundle):
    dot = geo_bundle.dag.to_dot("geo")
    assert dot.startswith('digraph "geo" {') and dot.rstrip().endswith("}")
    assert dot.count("->") == len(geo_bundle.dag.arcs)


# ---------------------------------------------------------------- canonical model

def test_chain_extensions():
    m = build_canonical_model(parse_ontology("isa B A\nisa C B\n"))
    assert set(m.members("C")) == {"C"}
    assert set(m.members("B")) == {"B", "C"}
    assert set(m.members("A")) == {"A", "B", "C"}
    assert m.ext(TOP) == m.universe and m.ext(BOTTOM) == 0


def test_disjoint_siblings():
    m = build_canonical_model(parse_ontology("concept A\nconcept B\n"))
    assert m.ext("A") & m.ext("B") == 0


def test_overlap_adds_shared_point():
    m = build_canonical_model(parse_ontology("concept A\nconcept B\noverlap A B\nisa X A\n"))
    shared = m.ext("A") & m.ext("B")
    assert shared != 0
    assert [p for i, p in enumerate(m.points) if shared >> i & 1] == ["A&B"]
    assert m.ext("X") & m.ext("B") == 0


def test_overlap_with_common_descendant_adds_nothing():
    m = build_canonical_model(parse_ontology("isa C A\nisa C B\noverlap A B\n"))
    assert m.points == ("A", "B", "C")


def test_unknown_concept_in_model():
    m = build_canonical_model(parse_ontology("concept A"))
    with pytest.raises(UnknownConceptError):
        m.ext("B")


# ---------------------------------------------------------------- properties

seeds = st.integers(0, 10**6)


def _random_doc(seed, max_names=40):
    rng = random.Random(seed)
    return random_ontology(rng, rng.randint(1, max_names), max_parents=3)


@given(seeds)
def test_reachability_equals_declared_closure(seed):
    doc = _random_doc(seed)
    dag = classify(doc)
    closure = isa_closure(doc)
    for a in doc.concepts:
        for b in doc.concepts:
            assert dag.reaches(name_node(b), name_node(a)) == ((a, b) in closure)


@given(seeds)
def test_no_redundant_name_arcs(seed):
    doc = _random_doc(seed)
    dag = classify(doc)
    assert name_arcs(dag) == transitive_reduction(isa_closure(doc))
    for up, lo in dag.arcs:
        if up.kind is Kind.NAME and lo.kind is Kind.NAME:
            others = dag.children[up] - {lo}
            assert not any(dag.reaches(c, lo) for c in others)


@given(seeds)
def test_subsumption_matches_model(seed):
    doc = _random_doc(seed)
    dag = classify(doc)
    m = build_canonical_model(doc)
    for a in doc.concepts:
        for b in doc.concepts:
            assert is_subsumed(dag, a, b) == m.leq(a, b)


@given(seeds, st.randoms(use_true_random=False))
def test_insertion_order_independence(seed, rnd):
    doc = _random_doc(seed, 25)
    base = classify(doc).arcs
    order = sorted(doc.concepts)
    for _ in range(3):
        rnd.shuffle(order)
        assert classify(doc, order).arcs == base

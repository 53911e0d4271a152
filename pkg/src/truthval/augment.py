"""Extend a base subsumption DAG with negated names and artificial
conjunction nodes, so that "is there a y ⊑ a ⊓ ¬b" becomes a reachability
question on the graph."""

from __future__ import annotations

from typing import Sequence

from .ontology import (BOTTOM, TOP, CanonicalModel, ConceptDag, Kind, Node, art_node,
                       insert_node, name_node, neg_node)
from .ontology import top_bottom_search as _search


class AlreadyAugmentedError(ValueError):
    pass


def top_bottom_search(dag: ConceptDag, X: set[Node], c: Node,
                      model: CanonicalModel) -> tuple[set[Node], set[Node]]:
    """(minimal members of X above c, maximal members of X below c), with
    subsumption decided by the canonical model."""
    return _search(dag, X, model.leq, c)


def add_negations(dag: ConceptDag, model: CanonicalModel,
                  order: Sequence[str] | None = None) -> ConceptDag:
    """Return an augmented copy of a base DAG.

    Each ``¬v`` is placed by top/bottom search over the names, ⊤, ⊥ and the
    negations inserted so far.  A negation equivalent to an existing node
    (⊥ when ``v`` covers every element, or a name) is not duplicated; the
    ``negations`` map points at the equivalent node instead.  For every name
    ``d`` that overlaps ``¬v`` without either containing the other, an
    artificial node ``¬v ⊓ d`` is hung below both with a single arc to ⊥.
    """
    if dag.augmented or dag.nodes_of(Kind.NEG, Kind.ART):
        raise AlreadyAugmentedError("DAG is already augmented")
    out = dag.copy()
    names = [n.label for n in out.nodes_of(Kind.NAME)]
    if order is not None:
        if sorted(order) != names:
            raise ValueError("order must be a permutation of the concept names")
        names = list(order)
    X: set[Node] = {TOP, BOTTOM} | {name_node(n) for n in names}
    for v in names:
        c = neg_node(v)
        rep = insert_node(out, X, model.leq, c)
        out.negations[v] = rep
        ext_c = model.ext(c)
        if ext_c == 0:
            continue
        for d in sorted(names):
            ext_d = model.ext(d)
            if ext_c & ext_d == 0:
                continue
            if ext_c & ~ext_d == 0 or ext_d & ~ext_c == 0:
                continue
            a = art_node(v, d)
            out.add_arc(name_node(d), a)
            out.add_arc(rep, a)
            out.add_arc(a, BOTTOM)
    out.augmented = True
    return out


def augment(dag: ConceptDag, model: CanonicalModel) -> ConceptDag:
    return add_negations(dag, model)

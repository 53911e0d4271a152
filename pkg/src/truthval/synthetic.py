"""Seeded generators for ontologies, KGs and false-triplet corpora used by
tests and benchmarks."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .kg import KnowledgeGraph, Triplet
from .ontology import OntologyDoc


def random_ontology(rng: random.Random, n_names: int, max_parents: int = 2,
                    root_prob: float = 0.15, overlap_prob: float = 0.05,
                    ontology_id: str = "rand") -> OntologyDoc:
    """DAG-shaped ontology over ``C00 .. C{n-1}``.

    Each name picks up to ``max_parents`` parents among earlier names (or
    none, with probability ``root_prob``), so the isa relation is acyclic by
    construction.  Redundant isa assertions are allowed on purpose.
    """
    names = [f"C{i:02d}" for i in range(n_names)]
    doc = OntologyDoc(ontology_id, set(names))
    for i, name in enumerate(names):
        if i == 0 or rng.random() < root_prob:
            continue
        k = rng.randint(1, min(max_parents, i))
        for parent in rng.sample(names[:i], k):
            doc.isa.add((name, parent))
    for i in range(n_names):
        for j in range(i + 1, n_names):
            if rng.random() < overlap_prob:
                doc.overlaps.add(frozenset((names[i], names[j])))
    return doc


@dataclass
class RuleKG:
    kg: KnowledgeGraph          # training graph (held-out target edges removed)
    held_out: list[Triplet]
    target: str


def rule_kg(rng: random.Random, n_people: int = 40, n_places: int = 12, n_regions: int = 6,
            p_edges: int = 2, held_out_fraction: float = 0.2,
            noise_edges: int = 30) -> RuleKG:
    """KG where ``lives_region(x, z)`` holds iff ``lives(x, y)`` and
    ``in_region(y, z)`` for some place ``y``.

    A share of the derived edges is held out.  Random ``knows`` edges between
    people add distracting paths.
    """
    people = [f"person{i}" for i in range(n_people)]
    places = [f"place{i}" for i in range(n_places)]
    regions = [f"region{i}" for i in range(n_regions)]
    edges: set[Triplet] = set()
    for y in places:
        edges.add(Triplet(y, "in_region", rng.choice(regions)))
    region_of = {t.subject: t.object for t in edges}
    derived = set()
    for x in people:
        for y in rng.sample(places, p_edges):
            edges.add(Triplet(x, "lives", y))
            derived.add(Triplet(x, "lives_region", region_of[y]))
    for _ in range(noise_edges):
        a, b = rng.sample(people, 2)
        edges.add(Triplet(a, "knows", b))
    derived_sorted = sorted(derived, key=lambda t: t.key)
    rng.shuffle(derived_sorted)
    n_hold = int(len(derived_sorted) * held_out_fraction)
    held = sorted(derived_sorted[:n_hold], key=lambda t: t.key)
    kg = KnowledgeGraph(list(edges) + derived_sorted[n_hold:])
    return RuleKG(kg, held, "lives_region")


@dataclass
class FalseCorpus:
    kg: KnowledgeGraph
    ontology: OntologyDoc
    match: dict[tuple[str, str], str]   # (entity, ontology id) -> concept
    false_triplets: list[Triplet]
    relation: str


def false_triplet_corpus(rng: random.Random, n_triplets: int = 30, n_names: int = 25,
                         n_subjects: int = 12, objects_per_subject: tuple[int, int] = (6, 12),
                         ontology_id: str = "rand") -> FalseCorpus:
    """Subjects linked to entities named after ontology concepts, plus lay
    triplets whose objects are concepts never seen in the KG.

    Every object entity maps to the concept it is named after.  Unseen
    objects cannot be reached by any relation path, so the verdict is false
    and the candidate set comes from the subject's ranking.
    """
    doc = random_ontology(rng, n_names, ontology_id=ontology_id)
    names = sorted(doc.concepts)
    unseen = set(rng.sample(names, max(2, n_names // 5)))
    seen = [n for n in names if n not in unseen]
    subjects = [f"org{i}" for i in range(n_subjects)]
    edges = []
    for s in subjects:
        k = min(rng.randint(*objects_per_subject), len(seen))
        for c in rng.sample(seen, k):
            edges.append(Triplet(s, "located_in", f"e_{c}"))
    kg = KnowledgeGraph(edges)
    match = {(f"e_{c}", ontology_id): c for c in names}
    lay = []
    unseen_sorted = sorted(unseen)
    for _ in range(n_triplets):
        lay.append(Triplet(rng.choice(subjects), "located_in", f"e_{rng.choice(unseen_sorted)}"))
    return FalseCorpus(kg, doc, match, lay, "located_in")

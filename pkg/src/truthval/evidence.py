"""Evidence of falseness.

Given the concept ``C(o)`` of a disputed entity and the concepts of the
candidates the knowledge graph does support, find a small set of concept
names that covers every candidate while leaving ``C(o)`` out.  Potential
evidence is collected along ⊤-paths of the augmented DAG, then a set cover
picks the smallest sub-collection.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

from .ontology import (BOTTOM, CanonicalModel, ConceptDag, Kind, Node,
                       name_node)

log = logging.getLogger(__name__)

OBJECT = "object"
SUBJECT = "subject"
DEFAULT_EXACT_LIMIT = 24


class NotAugmentedError(ValueError):
    pass


class AssumptionError(ValueError):
    """Some candidates have no witness of ``C(o) ⊓ ¬C(ō)``."""

    def __init__(self, rejected: Sequence[tuple[str, str]]):
        self.rejected = list(rejected)
        detail = "; ".join(f"{c}: {why}" for c, why in self.rejected)
        super().__init__(f"candidates violate the extraction assumption: {detail}")


class InfeasibleInstanceError(ValueError):
    pass


class CoverTooLargeError(ValueError):
    pass


class NoEvidenceError(ValueError):
    pass


@dataclass(frozen=True)
class SupSet:
    """Potential evidence for ``owner``: concept name -> candidates it was found from."""

    owner: str
    members: Mapping[str, tuple[str, ...]]
    omega_calls: int = field(default=0, compare=False)

    def names(self) -> list[str]:
        return sorted(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, name: object) -> bool:
        return name in self.members


@dataclass(frozen=True)
class CoverInstance:
    universe: tuple[str, ...]
    sets: Mapping[str, frozenset[str]]
    # longest-path depth from ⊤; among concepts covering the same candidates
    # the shallower (broader) one is kept
    depth: Mapping[str, int] = field(default_factory=dict)
    kind: str = OBJECT
    ontology: str = ""


@dataclass(frozen=True)
class EvidenceSet:
    kind: str
    ontology: str
    concepts: tuple[str, ...]
    solver: str = ""

    @property
    def cardinality(self) -> int:
        return len(self.concepts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "ontology": self.ontology, "concepts": list(self.concepts),
                "cardinality": self.cardinality, "solver": self.solver}


# ---------------------------------------------------------------- Ω

def _name(ref: Node | str) -> str:
    return ref.label if isinstance(ref, Node) else ref


def omega(dag: ConceptDag, o_node: Node | str, p_node: Node | str) -> set[Node]:
    """Names and negated names lying below both ``C(o)`` and ``¬P`` (⊥ excluded)."""
    if not dag.augmented:
        raise NotAugmentedError("DAG not augmented")
    o = dag.resolve(o_node)
    neg = dag.negation(_name(p_node))
    common = dag.descendants(o) & dag.descendants(neg)
    return {y for y in common if y.kind in (Kind.NAME, Kind.NEG) and y != BOTTOM}


def omega_exact(model: CanonicalModel, o_node: Node | str, p_node: Node | str) -> bool:
    """Satisfiability of ``C(o) ⊓ ¬P`` in the canonical model."""
    return model.ext(o_node) & ~model.ext(p_node) != 0


def _omega_test(dag: ConceptDag, target: str,
                model: CanonicalModel | None) -> Callable[[str], bool]:
    if model is not None:
        return lambda p: omega_exact(model, target, p)
    return lambda p: bool(omega(dag, target, p))


def screen_candidates(dag: ConceptDag, target: str, candidates: Iterable[str],
                      model: CanonicalModel | None = None
                      ) -> tuple[list[str], list[tuple[str, str]]]:
    """Split candidates into those satisfying the extraction assumption and
    the rejected ones with a reason."""
    test = _omega_test(dag, target, model)
    ok, rejected = [], []
    for c in _dedup(candidates):
        dag.resolve(c)
        if test(c):
            ok.append(c)
        elif dag.reaches(name_node(c), name_node(target)):
            rejected.append((c, f"statement would be true: {target} ⊑ {c}"))
        else:
            rejected.append((c, f"no named witness below {target} ⊓ ¬{c}"))
    return ok, rejected


def _dedup(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))


def _check(dag: ConceptDag, target: str, candidates: Sequence[str],
           model: CanonicalModel | None) -> list[str]:
    dag.resolve(target)
    ok, rejected = screen_candidates(dag, target, candidates, model)
    if rejected:
        raise AssumptionError(rejected)
    return ok


# ---------------------------------------------------------------- sup

def collect_sup(dag: ConceptDag, o_node: Node | str, candidates: Iterable[str],
                model: CanonicalModel | None = None) -> SupSet:
    """Walk every ⊤-path of every candidate upward from the candidate,
    keeping names while Ω stays non-empty and stopping at the first empty one.

    With ``model`` given, Ω is replaced by exact satisfiability of
    ``C(o) ⊓ ¬P`` in the canonical model.
    """
    target = _name(o_node)
    cands = _check(dag, target, list(candidates), model)
    test = _omega_test(dag, target, model)
    members: dict[str, set[str]] = {}
    calls = 0
    for cand in cands:
        for p in dag.paths_from_top(name_node(cand)):
            for node in reversed(p):
                if node.kind is not Kind.NAME:
                    continue
                calls += 1
                if test(node.label):
                    members.setdefault(node.label, set()).add(cand)
                else:
                    break
    return SupSet(target, {k: tuple(sorted(v)) for k, v in sorted(members.items())}, calls)


def collect_sup_bisect(dag: ConceptDag, o_node: Node | str, candidates: Iterable[str],
                       model: CanonicalModel | None = None) -> SupSet:
    """Same result as :func:`collect_sup`, locating the cut point on each path
    by binary search.

    Along a ⊤-path the names are ordered by subsumption, so Ω is empty on a
    (possibly empty) prefix and non-empty on the rest.  The search keeps
    ``lo`` at a position known to be empty (or -1) and ``hi`` at one known
    to be non-empty.
    """
    target = _name(o_node)
    cands = _check(dag, target, list(candidates), model)
    test = _omega_test(dag, target, model)
    members: dict[str, set[str]] = {}
    calls = 0
    for cand in cands:
        for p in dag.paths_from_top(name_node(cand)):
            names = [n.label for n in p if n.kind is Kind.NAME]
            # the last name is the candidate itself; screened to have Ω ≠ ∅
            lo, hi = -1, len(names) - 1
            while hi - lo > 1:
                mid = (lo + hi) // 2
                calls += 1
                if test(names[mid]):
                    hi = mid
                else:
                    lo = mid
            for name in names[hi:]:
                members.setdefault(name, set()).add(cand)
    return SupSet(target, {k: tuple(sorted(v)) for k, v in sorted(members.items())}, calls)


def omega_profile(dag: ConceptDag, o_node: Node | str, path: Sequence[Node],
                  model: CanonicalModel | None = None) -> list[bool]:
    """Ω non-emptiness for each name on ``path`` (top-down)."""
    test = _omega_test(dag, _name(o_node), model)
    return [test(n.label) for n in path if n.kind is Kind.NAME]


# ---------------------------------------------------------------- cover

def _depths(dag: ConceptDag) -> dict[str, int]:
    """Longest-path distance from ⊤ for every name."""
    memo: dict[Node, int] = {}

    def depth(n: Node) -> int:
        if n not in memo:
            ps = dag.parents[n]
            memo[n] = 1 + max((depth(p) for p in ps), default=-1)
        return memo[n]

    return {n.label: depth(n) for n in dag.nodes_of(Kind.NAME)}


def build_cover_instance(sup: SupSet, candidates: Iterable[str], dag: ConceptDag,
                         kind: str = OBJECT, ontology: str = "") -> CoverInstance:
    universe = tuple(_dedup(candidates))
    sets = {}
    for a in sup.names():
        node = name_node(a)
        sets[a] = frozenset(c for c in universe if dag.reaches(node, name_node(c)))
        if not sets[a]:
            raise InfeasibleInstanceError(f"{a} covers no candidate")
    covered = frozenset().union(*sets.values()) if sets else frozenset()
    if covered != frozenset(universe):
        missing = sorted(set(universe) - covered)
        raise InfeasibleInstanceError(f"infeasible instance: {missing} uncovered")
    depth = _depths(dag)
    return CoverInstance(universe, sets, {a: depth[a] for a in sets}, kind, ontology)


def reduce_family(instance: CoverInstance) -> list[tuple[str, frozenset[str]]]:
    """Drop duplicate and strictly dominated sets.

    Of several concepts covering exactly the same candidates the broadest
    (smallest depth, then name) is kept; a set strictly contained in another
    is removed.  Neither step changes the optimal cover size.
    """
    by_cover: dict[frozenset[str], str] = {}
    for name in sorted(instance.sets, key=lambda a: (instance.depth.get(a, 0), a)):
        by_cover.setdefault(instance.sets[name], name)
    kept = []
    covers = list(by_cover)
    for cov, name in by_cover.items():
        if not any(cov < other for other in covers):
            kept.append((name, cov))
    return sorted(kept)


def _bitmasks(instance: CoverInstance, family: Sequence[tuple[str, frozenset[str]]]):
    index = {c: i for i, c in enumerate(instance.universe)}
    masks = []
    for _, cov in family:
        m = 0
        for c in cov:
            m |= 1 << index[c]
        masks.append(m)
    return (1 << len(instance.universe)) - 1, masks


def solve_cover_exact(instance: CoverInstance, limit: int = DEFAULT_EXACT_LIMIT) -> EvidenceSet:
    """Minimum-cardinality cover by branch and bound over bit masks.

    Among optimal covers the lexicographically smallest sorted name list
    (over the reduced family) is returned.
    """
    family = reduce_family(instance)
    if len(family) > limit:
        raise CoverTooLargeError(
            f"{len(family)} sets after reduction exceed the exact limit {limit}; use greedy")
    full, masks = _bitmasks(instance, family)
    names = [n for n, _ in family]
    n_elem = len(instance.universe)
    covering = [[i for i, m in enumerate(masks) if m >> e & 1] for e in range(n_elem)]
    best: list[tuple[int, tuple[str, ...]] | None] = [None]
    seen: set[int] = set()

    def bound(uncovered: int) -> int:
        gain = max((bin(m & uncovered).count("1") for m in masks), default=0)
        return math.ceil(bin(uncovered).count("1") / gain) if gain else n_elem + 1

    def search(covered: int, chosen: int, size: int) -> None:
        if chosen in seen:
            return
        seen.add(chosen)
        if covered == full:
            picked = tuple(sorted(names[i] for i in range(len(names)) if chosen >> i & 1))
            if best[0] is None or (size, picked) < best[0]:
                best[0] = (size, picked)
            return
        uncovered = full & ~covered
        if best[0] is not None and size + bound(uncovered) > best[0][0]:
            return
        elems = [e for e in range(n_elem) if uncovered >> e & 1]
        e = min(elems, key=lambda k: (len(covering[k]), k))
        for i in covering[e]:
            search(covered | masks[i], chosen | (1 << i), size + 1)

    search(0, 0, 0)
    if best[0] is None:
        raise InfeasibleInstanceError("no cover exists")
    return EvidenceSet(instance.kind, instance.ontology, best[0][1], "exact")


def solve_cover_greedy(instance: CoverInstance) -> EvidenceSet:
    """Repeatedly take the set covering most uncovered candidates (ties by name)."""
    family = reduce_family(instance)
    uncovered = set(instance.universe)
    picked = []
    while uncovered:
        name, cov = min(family, key=lambda nc: (-len(nc[1] & uncovered), nc[0]),
                        default=(None, frozenset()))
        if name is None or not cov & uncovered:
            raise InfeasibleInstanceError("infeasible instance")
        picked.append(name)
        uncovered -= cov
    return EvidenceSet(instance.kind, instance.ontology, tuple(sorted(picked)), "greedy")


def solve_cover(instance: CoverInstance, limit: int = DEFAULT_EXACT_LIMIT) -> EvidenceSet:
    """Exact when the reduced family fits the limit, greedy otherwise."""
    try:
        return solve_cover_exact(instance, limit)
    except CoverTooLargeError:
        log.info("cover instance too large for exact search, using greedy")
        return solve_cover_greedy(instance)


# ---------------------------------------------------------------- checks

def verify_evidence(model: CanonicalModel, o_node: Node | str, candidates: Iterable[str],
                    alpha: EvidenceSet | Iterable[str]) -> bool:
    """Check both conditions of an evidence of falseness in the canonical model:
    every candidate is subsumed by some member, and ``C(o)`` keeps an element
    outside the union of the members."""
    names = alpha.concepts if isinstance(alpha, EvidenceSet) else tuple(alpha)
    exts = [model.ext(a) for a in names]
    for c in candidates:
        ec = model.ext(c)
        if not any(ec & ~ea == 0 for ea in exts):
            return False
    union = 0
    for ea in exts:
        union |= ea
    return model.ext(o_node) & ~union != 0


def brute_force_min_evidence(model: CanonicalModel, o_node: Node | str,
                             candidates: Iterable[str], name_pool: Iterable[str],
                             limit: int = 20, kind: str = OBJECT,
                             ontology: str = "") -> EvidenceSet:
    """Smallest evidence set by enumerating subsets of ``name_pool`` in
    order of size (lexicographic within a size)."""
    pool = sorted(set(name_pool))
    if len(pool) > limit:
        raise ValueError(f"name pool of {len(pool)} exceeds brute-force limit {limit}")
    cands = list(candidates)
    for k in range(len(pool) + 1):
        for combo in itertools.combinations(pool, k):
            if verify_evidence(model, o_node, cands, combo):
                return EvidenceSet(kind, ontology, combo, "brute-force")
    raise NoEvidenceError("no evidence of falseness exists for these candidates")


def select_best_evidence(per_ontology_results: Iterable[tuple[str, EvidenceSet | None,
                                                              EvidenceSet | None]]) -> EvidenceSet:
    """Smallest evidence over all ontologies and both directions; ties go to
    object evidence, then to the smaller ontology id."""
    pool = []
    for ontology, obj, subj in per_ontology_results:
        if obj is not None:
            pool.append(((obj.cardinality, 0, ontology), obj))
        if subj is not None:
            pool.append(((subj.cardinality, 1, ontology), subj))
    if not pool:
        raise NoEvidenceError("no matching ontology")
    return min(pool, key=lambda kv: kv[0])[1]


# ---------------------------------------------------------------- driver

@dataclass
class Extraction:
    kind: str
    ontology: str
    target: str
    candidates: list[str]
    rejected: list[tuple[str, str]]
    sup: SupSet | None = None
    evidence: EvidenceSet | None = None
    verified: bool = False

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ontology": self.ontology,
            "target_concept": self.target,
            "candidate_concepts": self.candidates,
            "rejected": [{"concept": c, "reason": r} for c, r in self.rejected],
            "sup": {} if self.sup is None else {k: list(v) for k, v in self.sup.members.items()},
            "evidence": None if self.evidence is None else self.evidence.to_dict(),
            "verified": self.verified,
        }


def extract_evidence(dag: ConceptDag, model: CanonicalModel, target: str,
                     candidates: Iterable[str], kind: str = OBJECT, ontology: str = "",
                     method: str = "linear", omega_mode: str = "graph",
                     exact_limit: int = DEFAULT_EXACT_LIMIT) -> Extraction:
    """Screen candidates, collect potential evidence, solve the cover and
    verify the result.  Rejected candidates are dropped with a warning."""
    if method not in ("linear", "bisect"):
        raise ValueError(f"unknown sup method {method!r}")
    if omega_mode not in ("graph", "exact"):
        raise ValueError(f"unknown omega mode {omega_mode!r}")
    exact = model if omega_mode == "exact" else None
    dag.resolve(target)
    ok, rejected = screen_candidates(dag, target, candidates, exact)
    for c, why in rejected:
        log.debug("dropping candidate %s for %s: %s", c, target, why)
    result = Extraction(kind, ontology, target, ok, rejected)
    if not ok:
        return result
    collect = collect_sup if method == "linear" else collect_sup_bisect
    result.sup = collect(dag, target, ok, exact)
    instance = build_cover_instance(result.sup, ok, dag, kind, ontology)
    evidence = solve_cover(instance, exact_limit)
    result.verified = verify_evidence(model, target, ok, evidence)
    if not result.verified:
        raise AssertionError(f"cover {evidence.concepts} failed verification")
    result.evidence = replace(evidence, kind=kind, ontology=ontology)
    return result

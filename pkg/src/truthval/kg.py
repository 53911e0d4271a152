"""Triplet storage with forward/backward adjacency indexes.

The graph is built once from a stream of records and is read-only afterwards,
so a single instance may be shared between threads.
"""

from __future__ import annotations

import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

FORWARD = "forward"
BACKWARD = "backward"


class KGFormatError(ValueError):
    """Raised for a malformed KG / whitelist record."""

    def __init__(self, message: str, line_no: int | None = None, source: str | None = None):
        where = ""
        if source:
            where += f"{source}:"
        if line_no is not None:
            where += f"{line_no}:"
        super().__init__(f"{where} {message}".strip())
        self.line_no = line_no
        self.source = source


def normalize(token: str) -> str:
    """NFC-normalize and trim an identifier."""
    return unicodedata.normalize("NFC", token).strip()


@dataclass(frozen=True)
class Triplet:
    """A (subject, relation, object) statement.

    Identity is the (subject, relation, object) key; provenance and tags
    ride along but do not take part in equality.
    """

    subject: str
    relation: str
    object: str
    provenance: str = field(default="", compare=False)
    tags: frozenset[str] = field(default_factory=frozenset, compare=False)

    def __post_init__(self) -> None:
        for name in ("subject", "relation", "object"):
            value = normalize(getattr(self, name))
            if not value:
                raise ValueError(f"empty {name} in triplet")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "tags", frozenset(normalize(t) for t in self.tags if normalize(t)))

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.subject, self.relation, self.object)

    def to_line(self) -> str:
        fields = [self.subject, self.relation, self.object]
        if self.provenance or self.tags:
            fields.append(self.provenance)
        if self.tags:
            fields.append(",".join(sorted(self.tags)))
        return "\t".join(fields)

    def __str__(self) -> str:
        return f"({self.subject}, {self.relation}, {self.object})"


class KnowledgeGraph:
    """Directed multigraph of entities joined by relation-labelled edges."""

    def __init__(self, triplets: Iterable[Triplet] = ()):
        merged: dict[tuple[str, str, str], Triplet] = {}
        for t in triplets:
            prev = merged.get(t.key)
            merged[t.key] = t if prev is None else _merge(prev, t)
        self._edges = merged
        fwd: dict[tuple[str, str], set[str]] = defaultdict(set)
        bwd: dict[tuple[str, str], set[str]] = defaultdict(set)
        entities: set[str] = set()
        relations: set[str] = set()
        for s, r, o in merged:
            fwd[(s, r)].add(o)
            bwd[(o, r)].add(s)
            entities.update((s, o))
            relations.add(r)
        self._fwd = {k: frozenset(v) for k, v in fwd.items()}
        self._bwd = {k: frozenset(v) for k, v in bwd.items()}
        self._entities = frozenset(entities)
        self._relations = frozenset(relations)
        # per-entity outgoing (relation, direction) pairs, used by path search
        steps: dict[str, set[tuple[str, str]]] = defaultdict(set)
        for s, r in self._fwd:
            steps[s].add((r, FORWARD))
        for o, r in self._bwd:
            steps[o].add((r, BACKWARD))
        self._steps = {k: tuple(sorted(v)) for k, v in steps.items()}

    @property
    def entities(self) -> frozenset[str]:
        return self._entities

    @property
    def relations(self) -> frozenset[str]:
        return self._relations

    @property
    def edges(self) -> frozenset[Triplet]:
        return frozenset(self._edges.values())

    def __len__(self) -> int:
        return len(self._edges)

    def __iter__(self) -> Iterator[Triplet]:
        return iter(self.sorted_triplets())

    def __contains__(self, item: object) -> bool:
        if isinstance(item, Triplet):
            return item.key in self._edges
        if isinstance(item, tuple) and len(item) == 3:
            return tuple(normalize(x) for x in item) in self._edges
        return False

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, KnowledgeGraph):
            return NotImplemented
        return self.records() == other.records()

    def __repr__(self) -> str:
        return f"KnowledgeGraph({len(self._entities)} entities, {len(self._edges)} edges)"

    def get(self, subject: str, relation: str, obj: str) -> Triplet | None:
        return self._edges.get((normalize(subject), normalize(relation), normalize(obj)))

    def sorted_triplets(self) -> list[Triplet]:
        return [self._edges[k] for k in sorted(self._edges)]

    def triplets_of(self, relation: str) -> list[Triplet]:
        relation = normalize(relation)
        return [t for t in self.sorted_triplets() if t.relation == relation]

    def records(self) -> list[tuple[str, str, str, str, tuple[str, ...]]]:
        return [(t.subject, t.relation, t.object, t.provenance, tuple(sorted(t.tags)))
                for t in self.sorted_triplets()]

    def neighbors(self, node: str, relation: str, direction: str = FORWARD) -> frozenset[str]:
        """Objects of ``(node, relation, ?)`` or subjects of ``(?, relation, node)``."""
        key = (normalize(node), normalize(relation))
        if direction == FORWARD:
            return self._fwd.get(key, frozenset())
        if direction == BACKWARD:
            return self._bwd.get(key, frozenset())
        raise ValueError(f"unknown direction {direction!r}")

    def steps_from(self, node: str) -> tuple[tuple[str, str], ...]:
        """(relation, direction) pairs with at least one edge leaving ``node``."""
        return self._steps.get(node, ())

    def dumps(self) -> str:
        return "".join(t.to_line() + "\n" for t in self.sorted_triplets())

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")


def _merge(a: Triplet, b: Triplet) -> Triplet:
    # order-independent: smallest non-empty provenance wins, tags are unioned
    provs = sorted(p for p in (a.provenance, b.provenance) if p)
    return Triplet(a.subject, a.relation, a.object,
                   provs[0] if provs else "", a.tags | b.tags)


def parse_records(lines: Iterable[str], source: str | None = None,
                  min_fields: int = 3) -> Iterator[Triplet]:
    """Parse TAB-separated triplet lines; '#' lines and blank lines are skipped."""
    for line_no, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) < min_fields or len(fields) > 5:
            raise KGFormatError(f"expected 3 to 5 TAB-separated fields, got {len(fields)}",
                                line_no, source)
        s, r, o = (normalize(f) for f in fields[:3])
        for name, value in (("subject", s), ("relation", r), ("object", o)):
            if not value:
                raise KGFormatError(f"empty {name} field", line_no, source)
        provenance = fields[3].strip() if len(fields) > 3 else ""
        tags = frozenset(t for t in (fields[4].split(",") if len(fields) > 4 else ()) if t.strip())
        yield Triplet(s, r, o, provenance, tags)


def ingest_triplets(records: Iterable[str | Triplet], source: str | None = None) -> KnowledgeGraph:
    """Build a graph from raw lines or ready-made triplets.

    Duplicate keys collapse; the result does not depend on record order.
    """
    records = list(records)
    triplets = [r for r in records if isinstance(r, Triplet)]
    lines = [r for r in records if not isinstance(r, Triplet)]
    triplets.extend(parse_records(lines, source))
    return KnowledgeGraph(triplets)


def load_kg(path: str | Path) -> KnowledgeGraph:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return ingest_triplets(fh, source=str(path))


def load_whitelist(path: str | Path) -> set[tuple[str, str, str]]:
    """Read a whitelist file (first three fields of the KG format)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise KGFormatError(f"cannot read whitelist file: {exc}", source=str(path)) from exc
    keys = set()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip() or raw.lstrip().startswith("#"):
            continue
        fields = raw.split("\t")
        if len(fields) < 3:
            raise KGFormatError("whitelist line needs subject, relation, object", line_no, str(path))
        key = tuple(normalize(f) for f in fields[:3])
        if not all(key):
            raise KGFormatError("empty field in whitelist line", line_no, str(path))
        keys.add(key)
    return keys


def rank_fractions(kg: KnowledgeGraph, scorer: Mapping[str, object]) -> dict[tuple[str, str, str], float]:
    """Rank every triplet within its relation by a score function.

    ``scorer`` maps relation -> callable(subject, object) -> score.  The
    fraction is ``rank / count`` with 1-based ranks, ties broken by
    (subject, object).  Relations without a scorer are left out.
    """
    out: dict[tuple[str, str, str], float] = {}
    for relation in sorted(kg.relations):
        fn = scorer.get(relation)
        if fn is None:
            continue
        trips = kg.triplets_of(relation)
        scored = sorted(trips, key=lambda t: (-fn(t.subject, t.object), t.subject, t.object))
        n = len(scored)
        for rank, t in enumerate(scored, start=1):
            out[t.key] = rank / n
    return out


def filter_kg(kg: KnowledgeGraph,
              ranked_scores: Mapping[tuple[str, str, str], float],
              top_fraction: float = 0.1,
              whitelists: Iterable[str | Path] = (),
              banned_tags: Iterable[str] = ()) -> KnowledgeGraph:
    """Keep top-ranked or whitelisted triplets, then drop banned semantic types.

    A triplet survives if its per-relation rank fraction is at most
    ``top_fraction`` or it appears in any whitelist file.  Banned-tag
    removal runs after the union, so a banned triplet is dropped even when
    whitelisted.  Triplets missing from ``ranked_scores`` can only survive
    through a whitelist.
    """
    if not 0 < top_fraction <= 1:
        raise ValueError("top_fraction must lie in (0, 1]")
    allowed: set[tuple[str, str, str]] = set()
    for path in whitelists:
        allowed |= load_whitelist(path)
    banned = {normalize(t) for t in banned_tags}
    keep = []
    for t in kg.sorted_triplets():
        frac = ranked_scores.get(t.key)
        if (frac is not None and frac <= top_fraction) or t.key in allowed:
            if not (t.tags & banned):
                keep.append(t)
    return KnowledgeGraph(keep)

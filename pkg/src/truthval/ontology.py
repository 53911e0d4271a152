"""Concept ontologies, the subsumption DAG and a finite canonical model.

Subsumption semantics are closed-world: every concept name owns one private
domain element, extensions are the union of the private elements of all
descendants (plus one shared element per declared overlap that has no
common descendant), and a negation is the complement with respect to all
elements.  Extensions are Python ints used as bit sets.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence


class OntologyError(ValueError):
    pass


class UnknownConceptError(KeyError):
    pass


# ---------------------------------------------------------------- document

@dataclass
class OntologyDoc:
    id: str
    concepts: set[str] = field(default_factory=set)
    isa: set[tuple[str, str]] = field(default_factory=set)
    overlaps: set[frozenset[str]] = field(default_factory=set)

    def parents(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {c: set() for c in self.concepts}
        for child, parent in self.isa:
            out[child].add(parent)
        return out

    def children(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {c: set() for c in self.concepts}
        for child, parent in self.isa:
            out[parent].add(child)
        return out

    def ancestors(self) -> dict[str, frozenset[str]]:
        """Reflexive-transitive closure of declared isa, per concept."""
        parents = self.parents()
        memo: dict[str, frozenset[str]] = {}

        def up(c: str) -> frozenset[str]:
            if c not in memo:
                acc = {c}
                for p in parents[c]:
                    acc |= up(p)
                memo[c] = frozenset(acc)
            return memo[c]

        for c in sorted(self.concepts):
            up(c)
        return memo

    def dumps(self) -> str:
        lines = [f"ontology {self.id}"] if self.id else []
        lines += [f"concept {c}" for c in sorted(self.concepts)]
        lines += [f"isa {c} {p}" for c, p in sorted(self.isa)]
        lines += ["overlap " + " ".join(sorted(pair)) for pair in
                  sorted(self.overlaps, key=lambda s: sorted(s))]
        return "\n".join(lines) + "\n"


def _check_acyclic(concepts: Iterable[str], isa: Iterable[tuple[str, str]]) -> None:
    parents: dict[str, list[str]] = defaultdict(list)
    for child, parent in isa:
        parents[child].append(parent)
    state: dict[str, int] = {}
    for start in sorted(concepts):
        if state.get(start):
            continue
        stack = [(start, iter(sorted(parents[start])))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                raise OntologyError(f"isa cycle through {nxt!r}")
            elif not state.get(nxt):
                state[nxt] = 1
                stack.append((nxt, iter(sorted(parents[nxt]))))


def parse_ontology(text: str, default_id: str = "") -> OntologyDoc:
    """Parse the line-oriented ontology format.

    Directives: ``ontology <id>``, ``concept <name>``, ``isa <child> <parent>``
    (declares both ends), ``overlap <a> <b>``.  ``#`` starts a comment.
    """
    doc = OntologyDoc(default_id)
    seen_id = False
    pending_overlaps = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        op, args = parts[0], parts[1:]
        if op == "ontology" and len(args) == 1:
            if seen_id:
                raise OntologyError(f"line {line_no}: duplicate ontology id")
            doc.id = args[0]
            seen_id = True
        elif op == "concept" and len(args) == 1:
            doc.concepts.add(args[0])
        elif op == "isa" and len(args) == 2:
            if args[0] == args[1]:
                raise OntologyError(f"line {line_no}: isa cycle on {args[0]!r}")
            doc.concepts.update(args)
            doc.isa.add((args[0], args[1]))
        elif op == "overlap" and len(args) == 2:
            pending_overlaps.append((line_no, args[0], args[1]))
        else:
            raise OntologyError(f"line {line_no}: cannot parse {raw.strip()!r}")
    for line_no, a, b in pending_overlaps:
        for name in (a, b):
            if name not in doc.concepts:
                raise OntologyError(f"line {line_no}: undeclared concept {name!r} in overlap")
        if a != b:
            doc.overlaps.add(frozenset((a, b)))
    _check_acyclic(doc.concepts, doc.isa)
    return doc


def load_ontology(path: str | Path) -> OntologyDoc:
    path = Path(path)
    return parse_ontology(path.read_text(encoding="utf-8"), default_id=path.stem)


# ---------------------------------------------------------------- DAG

class Kind(str, enum.Enum):
    TOP = "top"
    NAME = "name"
    NEG = "neg"
    ART = "art"
    BOTTOM = "bottom"


@dataclass(frozen=True, order=True)
class Node:
    kind: Kind
    label: str = ""
    partner: str = ""

    def __str__(self) -> str:
        if self.kind is Kind.TOP:
            return "⊤"
        if self.kind is Kind.BOTTOM:
            return "⊥"
        if self.kind is Kind.NEG:
            return f"¬{self.label}"
        if self.kind is Kind.ART:
            return f"¬{self.label} ⊓ {self.partner}"
        return self.label


TOP = Node(Kind.TOP)
BOTTOM = Node(Kind.BOTTOM)


def name_node(name: str) -> Node:
    return Node(Kind.NAME, name)


def neg_node(name: str) -> Node:
    return Node(Kind.NEG, name)


def art_node(negated: str, partner: str) -> Node:
    return Node(Kind.ART, negated, partner)


class ConceptDag:
    """Subsumption DAG.  An arc ``(upper, lower)`` means lower ⊑ upper.

    ``negations`` maps a concept name to the node standing for its
    negation; that is a NEG node, or an existing node when the negation is
    equivalent to it (⊥ or a concept name).
    """

    def __init__(self) -> None:
        self.children: dict[Node, set[Node]] = {TOP: set(), BOTTOM: set()}
        self.parents: dict[Node, set[Node]] = {TOP: set(), BOTTOM: set()}
        self.negations: dict[str, Node] = {}
        self.augmented = False
        self._down: dict[Node, frozenset[Node]] = {}

    # -- structure
    @property
    def nodes(self) -> frozenset[Node]:
        return frozenset(self.children)

    def nodes_of(self, *kinds: Kind) -> list[Node]:
        return sorted(n for n in self.children if n.kind in kinds)

    @property
    def arcs(self) -> frozenset[tuple[Node, Node]]:
        return frozenset((u, l) for u, ls in self.children.items() for l in ls)

    def add_node(self, node: Node) -> None:
        if node not in self.children:
            self.children[node] = set()
            self.parents[node] = set()
            self._down.clear()

    def add_arc(self, upper: Node, lower: Node) -> None:
        self.add_node(upper)
        self.add_node(lower)
        self.children[upper].add(lower)
        self.parents[lower].add(upper)
        self._down.clear()

    def remove_arc(self, upper: Node, lower: Node) -> None:
        self.children[upper].discard(lower)
        self.parents[lower].discard(upper)
        self._down.clear()

    def copy(self) -> "ConceptDag":
        new = ConceptDag()
        new.children = {k: set(v) for k, v in self.children.items()}
        new.parents = {k: set(v) for k, v in self.parents.items()}
        new.negations = dict(self.negations)
        new.augmented = self.augmented
        return new

    def resolve(self, ref: Node | str) -> Node:
        node = ref if isinstance(ref, Node) else name_node(ref)
        if node not in self.children:
            raise UnknownConceptError(str(ref))
        return node

    def negation(self, name: str | Node) -> Node:
        label = name.label if isinstance(name, Node) else name
        try:
            return self.negations[label]
        except KeyError:
            raise UnknownConceptError(f"¬{label}") from None

    # -- reachability
    def descendants(self, node: Node) -> frozenset[Node]:
        """Nodes reachable from ``node`` (including itself)."""
        if node in self._down:
            return self._down[node]
        order: list[Node] = []
        seen: set[Node] = set()
        stack = [(node, False)]
        while stack:
            n, done = stack.pop()
            if done:
                order.append(n)
                continue
            if n in seen:
                continue
            seen.add(n)
            stack.append((n, True))
            stack.extend((c, False) for c in self.children[n] if c not in seen)
        for n in order:
            if n not in self._down:
                acc = {n}
                for c in self.children[n]:
                    acc |= self._down[c]
                self._down[n] = frozenset(acc)
        return self._down[node]

    def ancestors(self, node: Node) -> frozenset[Node]:
        out = {node}
        stack = [node]
        while stack:
            for p in self.parents[stack.pop()]:
                if p not in out:
                    out.add(p)
                    stack.append(p)
        return frozenset(out)

    def reaches(self, upper: Node, lower: Node) -> bool:
        return lower in self.descendants(upper)

    def paths_from_top(self, node: Node) -> Iterator[tuple[Node, ...]]:
        """All ⊤ -> ``node`` paths, each listed from ⊤ downward."""
        def up(n: Node, suffix: tuple[Node, ...]) -> Iterator[tuple[Node, ...]]:
            if n == TOP:
                yield (n,) + suffix
                return
            for p in sorted(self.parents[n]):
                yield from up(p, (n,) + suffix)
        yield from up(node, ())

    def to_dot(self, name: str = "subsumption") -> str:
        shapes = {Kind.NAME: "box", Kind.NEG: "box, style=dashed", Kind.ART: "ellipse",
                  Kind.TOP: "plaintext", Kind.BOTTOM: "plaintext"}
        ids = {n: f"n{i}" for i, n in enumerate(sorted(self.children))}
        out = [f'digraph "{name}" {{']
        for n, i in ids.items():
            label = str(n).replace('"', '\\"')
            out.append(f'  {i} [label="{label}", shape={shapes[n.kind]}];')
        for u, l in sorted(self.arcs):
            out.append(f"  {ids[u]} -> {ids[l]};")
        out.append("}")
        return "\n".join(out) + "\n"


def top_bottom_search(dag: ConceptDag, X: set[Node], leq: Callable[[Node, Node], bool],
                      c: Node) -> tuple[set[Node], set[Node]]:
    """Minimal members of ``X`` above ``c`` and maximal members below it.

    Traverses the current DAG from ⊤ downward (resp. ⊥ upward), only
    entering nodes of ``X`` that subsume (resp. are subsumed by) ``c``.
    Requires the arcs among ``X`` to be the transitive reduction of ``leq``.
    """
    above: set[Node] = set()
    seen: set[Node] = set()
    stack = [TOP]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        lower = [y for y in dag.children[x] if y in X and leq(c, y)]
        if lower:
            stack.extend(lower)
        else:
            above.add(x)
    below: set[Node] = set()
    seen = set()
    stack = [BOTTOM]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        upper = [y for y in dag.parents[x] if y in X and leq(y, c)]
        if upper:
            stack.extend(upper)
        else:
            below.add(x)
    return above, below


def insert_node(dag: ConceptDag, X: set[Node], leq: Callable[[Node, Node], bool],
                c: Node) -> Node:
    """Insert ``c`` under its minimal subsumers and above its maximal subsumees.

    Returns the node that now represents ``c``: ``c`` itself, or an existing
    member of ``X`` with the same meaning (no duplicate is created then).
    """
    above, below = top_bottom_search(dag, X, leq, c)
    for x in sorted(above):
        if leq(x, c):
            return x
    dag.add_node(c)
    for x in above:
        for y in below:
            if y in dag.children[x]:
                dag.remove_arc(x, y)
    for x in above:
        dag.add_arc(x, c)
    for y in below:
        dag.add_arc(c, y)
    X.add(c)
    return c


def classify(doc: OntologyDoc, order: Sequence[str] | None = None) -> ConceptDag:
    """Base DAG over the concept names plus ⊤ and ⊥.

    Names are inserted one at a time (identifier order unless ``order`` is
    given); the resulting arcs are the transitive reduction of the declared
    isa closure, whatever the order.
    """
    anc = doc.ancestors()

    def leq(a: Node, b: Node) -> bool:
        if a == b or b == TOP or a == BOTTOM:
            return True
        if a == TOP or b == BOTTOM:
            return False
        return b.label in anc[a.label]

    dag = ConceptDag()
    dag.add_arc(TOP, BOTTOM)
    X = {TOP, BOTTOM}
    names = sorted(doc.concepts) if order is None else list(order)
    if set(names) != doc.concepts or len(names) != len(doc.concepts):
        raise ValueError("insertion order must be a permutation of the concept names")
    for name in names:
        insert_node(dag, X, leq, name_node(name))
    return dag


def is_subsumed(dag: ConceptDag, a: Node | str, b: Node | str) -> bool:
    """``a ⊑ b``: there is a path from ``b`` down to ``a`` (reflexive)."""
    return dag.reaches(dag.resolve(b), dag.resolve(a))


# ---------------------------------------------------------------- model

@dataclass(frozen=True)
class CanonicalModel:
    """Finite interpretation over ``points`` with bit-set extensions.

    ``points`` lists one private element per concept name (named after it)
    followed by one synthetic element per overlap lacking a common
    descendant (named ``a&b``).
    """

    points: tuple[str, ...]
    names: dict[str, int]

    @property
    def universe(self) -> int:
        return (1 << len(self.points)) - 1

    def ext(self, ref: Node | str) -> int:
        node = ref if isinstance(ref, Node) else name_node(ref)
        if node.kind is Kind.TOP:
            return self.universe
        if node.kind is Kind.BOTTOM:
            return 0
        try:
            base = self.names[node.label]
        except KeyError:
            raise UnknownConceptError(node.label) from None
        if node.kind is Kind.NAME:
            return base
        neg = self.universe & ~base
        if node.kind is Kind.NEG:
            return neg
        return neg & self.ext(name_node(node.partner))

    def members(self, ref: Node | str) -> list[str]:
        e = self.ext(ref)
        return [p for i, p in enumerate(self.points) if e >> i & 1]

    def leq(self, a: Node | str, b: Node | str) -> bool:
        ea = self.ext(a)
        return ea & ~self.ext(b) == 0

    def satisfiable(self, ext: int) -> bool:
        return ext != 0


def build_canonical_model(doc: OntologyDoc) -> CanonicalModel:
    names = sorted(doc.concepts)
    anc = doc.ancestors()
    desc: dict[str, set[str]] = defaultdict(set)
    for c, ups in anc.items():
        for u in ups:
            desc[u].add(c)
    points = list(names)
    index = {n: i for i, n in enumerate(names)}
    ext = {n: 0 for n in names}
    for c in names:
        for u in anc[c]:
            ext[u] |= 1 << index[c]
    for pair in sorted(doc.overlaps, key=lambda s: sorted(s)):
        a, b = sorted(pair)
        if desc[a] & desc[b]:
            continue
        bit = 1 << len(points)
        points.append(f"{a}&{b}")
        for u in anc[a] | anc[b]:
            ext[u] |= bit
    return CanonicalModel(tuple(points), ext)

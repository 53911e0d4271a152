"""Path Ranking Algorithm: relation-path features, per-relation logistic
models, candidate ranking, rank thresholds and retrieval metrics."""

from __future__ import annotations

import logging
import math
import random
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .kg import BACKWARD, FORWARD, KnowledgeGraph, Triplet, normalize

log = logging.getLogger(__name__)

_DIR_CODE = {FORWARD: "+", BACKWARD: "-"}
_CODE_DIR = {"+": FORWARD, "-": BACKWARD}
_OPPOSITE = {FORWARD: BACKWARD, BACKWARD: FORWARD}


class NoFeaturesError(ValueError):
    """No path type met the support threshold for a relation."""


@dataclass(frozen=True, order=True)
class RelationPath:
    steps: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise ValueError("relation path needs at least one step")
        for rel, direction in self.steps:
            if direction not in _DIR_CODE:
                raise ValueError(f"bad direction {direction!r}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def length(self) -> int:
        return len(self.steps)

    def __str__(self) -> str:
        return "/".join(f"{rel}:{_DIR_CODE[d]}" for rel, d in self.steps)

    @classmethod
    def parse(cls, text: str) -> "RelationPath":
        steps = []
        for part in text.strip().split("/"):
            rel, sep, code = part.rpartition(":")
            if not sep or code not in _CODE_DIR or not rel:
                raise ValueError(f"bad path step {part!r}")
            steps.append((rel, _CODE_DIR[code]))
        return cls(tuple(steps))


def path(*steps: str) -> RelationPath:
    """Shorthand: ``path("p:+", "q:-")``."""
    return RelationPath.parse("/".join(steps))


@dataclass(frozen=True)
class PraModel:
    relation: str
    features: tuple[RelationPath, ...]
    weights: tuple[float, ...]
    bias: float = 0.0
    # training diagnostics, not serialized
    history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.features):
            raise ValueError("weights and features differ in length")
        if not all(math.isfinite(w) for w in self.weights) or not math.isfinite(self.bias):
            raise ValueError("non-finite model parameter")

    def dumps(self) -> str:
        for f in self.features:
            for rel, _ in f.steps:
                if "/" in rel or rel != rel.strip():
                    raise ValueError(f"relation {rel!r} cannot be serialized")
        lines = [f"pra-model v1 {self.relation}"]
        lines += [f"{f}\t{w!r}" for f, w in zip(self.features, self.weights)]
        lines.append(f"bias\t{self.bias!r}")
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "PraModel":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty model file")
        head = lines[0].split(" ", 2)
        if len(head) != 3 or head[0] != "pra-model" or head[1] != "v1":
            raise ValueError(f"unsupported model header {lines[0]!r}")
        features, weights, bias = [], [], None
        for ln in lines[1:]:
            key, _, value = ln.partition("\t")
            if key == "bias":
                bias = float(value)
            else:
                features.append(RelationPath.parse(key))
                weights.append(float(value))
        if bias is None:
            raise ValueError("model file lacks bias line")
        return cls(normalize(head[2]), tuple(features), tuple(weights), bias)

    @classmethod
    def load(cls, path: str | Path) -> "PraModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RankThresholds:
    rank_eps1: float
    rank_eps2: float
    x: float
    o_all_size: int
    o_kg_size: int
    bucket: int
    clamped: bool = False

    def to_dict(self) -> dict:
        return {"rank_eps1": self.rank_eps1, "rank_eps2": self.rank_eps2, "x": self.x,
                "o_all_size": self.o_all_size, "o_kg_size": self.o_kg_size,
                "bucket": self.bucket, "clamped": self.clamped}


@dataclass(frozen=True)
class Candidate:
    entity: str
    score: float
    rank: int


# ---------------------------------------------------------------- features

def _step(kg: KnowledgeGraph, node: str, rel: str, direction: str) -> list[str]:
    return sorted(kg.neighbors(node, rel, direction))


def walk_distribution(kg: KnowledgeGraph, source: str, rpath: RelationPath) -> dict[str, float]:
    """Exact end-point distribution of the path-constrained random walk.

    Mass at a node with no matching edge is dropped, so the values sum to at
    most one.
    """
    dist = {normalize(source): 1.0}
    for rel, direction in rpath.steps:
        nxt: dict[str, float] = defaultdict(float)
        for node in sorted(dist):
            succ = _step(kg, node, rel, direction)
            if not succ:
                continue
            share = dist[node] / len(succ)
            for n in succ:
                nxt[n] += share
        dist = dict(nxt)
        if not dist:
            break
    return dist


def reverse_walk_values(kg: KnowledgeGraph, target: str, rpath: RelationPath) -> dict[str, float]:
    """For every start node s, the probability that the walk from s ends at ``target``.

    Backward dynamic programme over the path; only nodes with non-zero
    value are returned.
    """
    values = {normalize(target): 1.0}
    for rel, direction in reversed(rpath.steps):
        prev: dict[str, float] = defaultdict(float)
        for node in sorted(values):
            for u in _step(kg, node, rel, _OPPOSITE[direction]):
                prev[u] += values[node] / len(kg.neighbors(u, rel, direction))
        values = dict(prev)
        if not values:
            break
    return values


def path_feature(kg: KnowledgeGraph, source: str, rpath: RelationPath, target: str) -> float:
    return walk_distribution(kg, source, rpath).get(normalize(target), 0.0)


def enumerate_path_types(kg: KnowledgeGraph, relation: str, max_len: int = 3,
                         min_support: int = 2) -> list[RelationPath]:
    """Relation paths of length <= ``max_len`` linking at least ``min_support``
    training pairs of ``relation``; the bare ``relation:+`` step is left out."""
    if max_len < 1 or min_support < 1:
        raise ValueError("max_len and min_support must be >= 1")
    relation = normalize(relation)
    pairs = [(t.subject, t.object) for t in kg.triplets_of(relation)]
    if not pairs:
        return []
    trivial = ((relation, FORWARD),)
    support: dict[tuple, set] = defaultdict(set)
    by_source: dict[str, set[str]] = defaultdict(set)
    for s, o in pairs:
        by_source[s].add(o)
    for s in sorted(by_source):
        targets = by_source[s]
        # frontier: node -> set of step-sequences reaching it
        frontier: dict[str, set[tuple]] = {s: {()}}
        for _ in range(max_len):
            nxt: dict[str, set[tuple]] = defaultdict(set)
            for node, seqs in frontier.items():
                for rel, direction in kg.steps_from(node):
                    for n in kg.neighbors(node, rel, direction):
                        for seq in seqs:
                            nxt[n].add(seq + ((rel, direction),))
            for node, seqs in nxt.items():
                if node in targets:
                    for seq in seqs:
                        support[seq].add((s, node))
            frontier = nxt
    found = [RelationPath(seq) for seq, hits in support.items()
             if seq != trivial and len(hits) >= min_support]
    return sorted(found)


def forward_features(kg: KnowledgeGraph, source: str,
                     features: Sequence[RelationPath]) -> dict[str, np.ndarray]:
    """Feature vectors for every entity reachable from ``source``."""
    out: dict[str, np.ndarray] = {}
    for i, f in enumerate(features):
        for node, p in walk_distribution(kg, source, f).items():
            if p > 0:
                out.setdefault(node, np.zeros(len(features)))[i] = p
    return out


def backward_features(kg: KnowledgeGraph, target: str,
                      features: Sequence[RelationPath]) -> dict[str, np.ndarray]:
    """Feature vectors f(s, ., target) for every s that can reach ``target``."""
    out: dict[str, np.ndarray] = {}
    for i, f in enumerate(features):
        for node, p in reverse_walk_values(kg, target, f).items():
            if p > 0:
                out.setdefault(node, np.zeros(len(features)))[i] = p
    return out


# ---------------------------------------------------------------- training

def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=float)))


def logistic_objective(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float) -> float:
    """Mean log-loss plus ``l2/2 * ||w||^2`` (bias unpenalised)."""
    z = X @ w + b
    # log(1 + e^z) - y z, computed stably
    loss = np.logaddexp(0.0, z) - y * z
    return float(loss.mean() + 0.5 * l2 * (w @ w))


def logistic_gradient(w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray,
                      l2: float) -> tuple[np.ndarray, float]:
    r = sigmoid(X @ w + b) - y
    n = len(y)
    return X.T @ r / n + l2 * w, float(r.sum() / n)


def fit_logistic(X: np.ndarray, y: np.ndarray, l2: float = 0.1, epochs: int = 200,
                 step: float | None = None) -> tuple[np.ndarray, float, list[float]]:
    """Full-batch gradient descent from zero weights.

    The default step is ``1/L`` for the objective's gradient Lipschitz bound
    ``L = ||[X 1]||_2^2 / (4n) + l2``, which keeps the objective
    non-increasing.
    """
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    if step is None:
        Xa = np.hstack([X, np.ones((n, 1))])
        lip = np.linalg.norm(Xa, 2) ** 2 / (4 * n) + l2
        step = 1.0 / lip
    history = [logistic_objective(w, b, X, y, l2)]
    for _ in range(epochs):
        gw, gb = logistic_gradient(w, b, X, y, l2)
        w = w - step * gw
        b = b - step * gb
        history.append(logistic_objective(w, b, X, y, l2))
    return w, b, history


def training_examples(kg: KnowledgeGraph, relation: str, features: Sequence[RelationPath],
                      negatives_per_positive: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = random.Random(seed)
    rows, labels = [], []
    relation = normalize(relation)
    by_source: dict[str, set[str]] = defaultdict(set)
    for t in kg.triplets_of(relation):
        by_source[t.subject].add(t.object)
    zero = np.zeros(len(features))
    for s in sorted(by_source):
        feats = forward_features(kg, s, features)
        for o in sorted(by_source[s]):
            rows.append(feats.get(o, zero))
            labels.append(1.0)
        pool = sorted(e for e in feats if e not in by_source[s] and e != s)
        k = min(len(pool), negatives_per_positive * len(by_source[s]))
        for o in rng.sample(pool, k):
            rows.append(feats[o])
            labels.append(0.0)
    return np.array(rows, dtype=float).reshape(len(rows), len(features)), np.array(labels)


def train_pra(kg: KnowledgeGraph, relation: str, negatives_per_positive: int = 5,
              l2: float = 0.1, seed: int = 0, max_len: int = 3, min_support: int = 2,
              epochs: int = 200) -> PraModel:
    relation = normalize(relation)
    if not kg.triplets_of(relation):
        raise ValueError(f"relation {relation!r} has no triplets")
    features = enumerate_path_types(kg, relation, max_len, min_support)
    if not features:
        raise NoFeaturesError(f"no path features for {relation!r} (try lowering min_support)")
    X, y = training_examples(kg, relation, features, negatives_per_positive, seed)
    w, b, history = fit_logistic(X, y, l2=l2, epochs=epochs)
    log.info("trained %s: %d features, %d examples, objective %.4f -> %.4f",
             relation, len(features), len(y), history[0], history[-1])
    return PraModel(relation, tuple(features), tuple(float(v) for v in w), float(b),
                    tuple(history))


# ---------------------------------------------------------------- scoring

def _score_vec(model: PraModel, vec: np.ndarray | None) -> float:
    z = model.bias
    if vec is not None:
        z += float(np.dot(model.weights, vec))
    return float(sigmoid(z))


def score(model: PraModel, kg: KnowledgeGraph, s: str, o: str) -> float:
    vec = np.array([path_feature(kg, s, f, o) for f in model.features])
    return _score_vec(model, vec)


def rank_candidates(model: PraModel, kg: KnowledgeGraph, anchor: str,
                    direction: str = FORWARD) -> list[Candidate]:
    """Rank every entity with a non-zero feature vector relative to ``anchor``.

    Forward ranks objects for subject ``anchor``; backward ranks subjects for
    object ``anchor``.  The anchor itself is never a candidate.
    """
    anchor = normalize(anchor)
    if direction == FORWARD:
        feats = forward_features(kg, anchor, model.features)
    elif direction == BACKWARD:
        feats = backward_features(kg, anchor, model.features)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    scored = [(e, _score_vec(model, v)) for e, v in feats.items() if e != anchor]
    scored.sort(key=lambda ev: (-ev[1], ev[0]))
    return [Candidate(e, sc, i) for i, (e, sc) in enumerate(scored, start=1)]


def compute_thresholds(o_kg_scores: Sequence[float], o_all_size: int,
                       offset: float = 5.0) -> RankThresholds:
    """Rank thresholds derived from how well the model ranks known objects.

    ``offset`` is the tunable middle term of the first threshold.
    """
    scores = list(o_kg_scores)
    if o_all_size < len(scores):
        raise ValueError("o_all_size smaller than the number of KG scores")
    if scores:
        x = len(scores) / max(statistics.median(scores), 1e-9)
    else:
        x = 0.0
    if x <= 0.25:
        bucket = 5
    elif x <= 0.5:
        bucket = 10
    elif x <= 0.75:
        bucket = 15
    else:
        bucket = 20
    eps1 = bucket + offset - o_all_size / 10000
    clamped = eps1 <= 0
    if clamped:
        eps1 = 1.0
    eps2 = max(eps1, 0.005 * o_all_size)
    return RankThresholds(eps1, eps2, x, o_all_size, len(scores), bucket, clamped)


def thresholds_for(model: PraModel, kg: KnowledgeGraph, anchor: str, direction: str,
                   ranking: Sequence[Candidate] | None = None,
                   offset: float = 5.0) -> RankThresholds:
    """Thresholds for one anchor: O_KG are the anchor's KG neighbours."""
    if ranking is None:
        ranking = rank_candidates(model, kg, anchor, direction)
    known = sorted(kg.neighbors(anchor, model.relation, direction))
    if direction == FORWARD:
        kg_scores = [score(model, kg, anchor, o) for o in known]
    else:
        kg_scores = [score(model, kg, s, anchor) for s in known]
    size = len({c.entity for c in ranking} | set(known))
    return compute_thresholds(kg_scores, size, offset)


def candidate_set(ranking: Sequence[Candidate], thresholds: RankThresholds) -> list[Candidate]:
    """Candidates whose rank is within the first rank threshold (floored)."""
    cutoff = math.floor(thresholds.rank_eps1)
    return [c for c in ranking if c.rank <= cutoff]


def rank_of(ranking: Sequence[Candidate], entity: str) -> int | None:
    entity = normalize(entity)
    for c in ranking:
        if c.entity == entity:
            return c.rank
    return None


@dataclass
class TruthPath:
    path: RelationPath
    weight: float
    feature: float
    instances: list[list[str]]

    @property
    def contribution(self) -> float:
        return self.weight * self.feature

    def to_dict(self) -> dict:
        return {"path": str(self.path), "weight": self.weight, "feature": self.feature,
                "contribution": self.contribution, "instances": self.instances}


@dataclass
class Verdict:
    label: bool
    object_rank: int | None
    subject_rank: int | None
    truth_paths: list[TruthPath]


def path_instances(kg: KnowledgeGraph, s: str, rpath: RelationPath, o: str,
                   limit: int = 3) -> list[list[str]]:
    """Concrete entity sequences that realise ``rpath`` from ``s`` to ``o``."""
    found: list[list[str]] = []

    def walk(node: str, i: int, trail: list[str]) -> None:
        if len(found) >= limit:
            return
        if i == len(rpath.steps):
            if node == o:
                found.append(trail)
            return
        rel, direction = rpath.steps[i]
        for n in _step(kg, node, rel, direction):
            walk(n, i + 1, trail + [n])

    walk(normalize(s), 0, [normalize(s)])
    return found


def truth_paths(model: PraModel, kg: KnowledgeGraph, s: str, o: str, k: int = 3) -> list[TruthPath]:
    """Top-k connecting feature paths by weight * feature value."""
    out = []
    for f, w in zip(model.features, model.weights):
        val = path_feature(kg, s, f, o)
        if val > 0:
            out.append(TruthPath(f, w, val, path_instances(kg, s, f, o)))
    out.sort(key=lambda tp: (-tp.contribution, str(tp.path)))
    return out[:k]


def verdict(model: PraModel, kg: KnowledgeGraph, triplet: Triplet,
            thresholds_s: RankThresholds, thresholds_o: RankThresholds,
            forward_ranking: Sequence[Candidate] | None = None,
            backward_ranking: Sequence[Candidate] | None = None,
            k_paths: int = 3) -> Verdict:
    """True when o ranks within rank_eps2 among s's objects, or s ranks within
    rank_eps2 among o's subjects."""
    s, o = triplet.subject, triplet.object
    if forward_ranking is None:
        forward_ranking = rank_candidates(model, kg, s, FORWARD)
    if backward_ranking is None:
        backward_ranking = rank_candidates(model, kg, o, BACKWARD)
    o_rank = rank_of(forward_ranking, o)
    s_rank = rank_of(backward_ranking, s)
    label = ((o_rank is not None and o_rank <= math.floor(thresholds_o.rank_eps2))
             or (s_rank is not None and s_rank <= math.floor(thresholds_s.rank_eps2)))
    paths = truth_paths(model, kg, s, o, k_paths) if label else []
    return Verdict(bool(label), o_rank, s_rank, paths)


# ---------------------------------------------------------------- evaluation

def reciprocal_rank(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    relevant = set(relevant)
    for i, e in enumerate(ranked, start=1):
        if e in relevant:
            return 1.0 / i
    return 0.0


def average_precision(ranked: Sequence[str], relevant: Iterable[str]) -> float:
    relevant = set(relevant)
    if not relevant:
        return 0.0
    hits, total = 0, 0.0
    for i, e in enumerate(ranked, start=1):
        if e in relevant:
            hits += 1
            total += hits / i
    return total / len(relevant)


def mrr_map(queries: Sequence[tuple[Sequence[str], Iterable[str]]]) -> dict[str, float]:
    """Mean reciprocal rank and mean average precision over (ranking, relevant) pairs."""
    if not queries:
        raise ValueError("no queries to evaluate")
    rr = [reciprocal_rank(r, rel) for r, rel in queries]
    ap = [average_precision(r, rel) for r, rel in queries]
    return {"mrr": sum(rr) / len(rr), "map": sum(ap) / len(ap), "queries": len(queries)}


def evaluate(model: PraModel, kg: KnowledgeGraph, held_out: Sequence[Triplet]) -> dict[str, float]:
    """Filtered MRR/MAP of held-out objects, one query per subject.

    Objects already linked to the subject in ``kg`` (and not held out) are
    removed from the ranking before positions are counted.
    """
    if not held_out:
        raise ValueError("empty held-out set")
    by_subject: dict[str, set[str]] = defaultdict(set)
    for t in held_out:
        if t.relation != model.relation:
            raise ValueError(f"held-out triplet {t} does not match model relation")
        by_subject[t.subject].add(t.object)
    queries = []
    for s in sorted(by_subject):
        correct = by_subject[s]
        known = kg.neighbors(s, model.relation, FORWARD) - correct
        ranked = [c.entity for c in rank_candidates(model, kg, s, FORWARD) if c.entity not in known]
        queries.append((ranked, correct))
    return mrr_map(queries)

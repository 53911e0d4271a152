"""End-to-end truth validation: verdict from the PRA model, then evidence of
falseness across ontologies for false triplets."""

from __future__ import annotations

import json
import logging
from importlib import resources
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .augment import add_negations
from .evidence import (DEFAULT_EXACT_LIMIT, OBJECT, SUBJECT, EvidenceSet, Extraction,
                       NoEvidenceError, extract_evidence, select_best_evidence)
from .kg import BACKWARD, FORWARD, KnowledgeGraph, Triplet, normalize
from .ontology import (CanonicalModel, ConceptDag, OntologyDoc, OntologyError,
                       build_canonical_model, classify, load_ontology)
from .pra import (Candidate, PraModel, RankThresholds, candidate_set, rank_candidates,
                  thresholds_for, verdict)

log = logging.getLogger(__name__)

EXIT_TRUE = 0
EXIT_MALFORMED = 1
EXIT_NO_MODEL = 2
EXIT_FALSE_WITH_EVIDENCE = 3
EXIT_FALSE_NO_EVIDENCE = 4

REPORT_VERSION = "truthval-report/1"


class MissingModelError(KeyError):
    pass


@dataclass
class Config:
    seed: int = 0
    max_path_len: int = 3
    min_support: int = 2
    negatives_per_positive: int = 5
    l2: float = 0.1
    epochs: int = 200
    top_fraction: float = 0.1
    exact_cover_limit: int = DEFAULT_EXACT_LIMIT
    threshold_offset: float = 5.0
    truth_paths: int = 3
    sup_method: str = "linear"
    omega_mode: str = "graph"

    @classmethod
    def from_text(cls, text: str) -> "Config":
        """``key=value`` lines; ``#`` comments; dashes in keys are accepted."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in types:
                raise ValueError(f"config line {line_no}: cannot parse {raw.strip()!r}")
            values[key] = value.strip()
        return cls().updated(values)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def updated(self, overrides: Mapping[str, object]) -> "Config":
        current = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, value in overrides.items():
            if value is None:
                continue
            default = current[key]
            current[key] = type(default)(value) if not isinstance(default, str) else str(value)
        return Config(**current)


class ConceptMatchTable:
    """(entity, ontology id) -> concept name."""

    def __init__(self, entries: Mapping[tuple[str, str], str] | None = None):
        self.entries = {(normalize(e), o): c for (e, o), c in (entries or {}).items()}

    @classmethod
    def loads(cls, text: str, source: str = "<match table>") -> "ConceptMatchTable":
        entries = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            if not raw.strip() or raw.lstrip().startswith("#"):
                continue
            parts = [p.strip() for p in raw.split("\t")]
            if len(parts) != 3 or not all(parts):
                raise ValueError(f"{source}:{line_no}: expected entity TAB ontology TAB concept")
            entries[(parts[0], parts[1])] = parts[2]
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "ConceptMatchTable":
        return cls.loads(Path(path).read_text(encoding="utf-8"), str(path))

    def match(self, entity: str, ontology: str) -> str | None:
        return self.entries.get((normalize(entity), ontology))

    def validate(self, ontologies: Iterable["OntologyBundle"]) -> None:
        known = {b.id: b.doc.concepts for b in ontologies}
        for (entity, ont), concept in sorted(self.entries.items()):
            if ont in known and concept not in known[ont]:
                raise OntologyError(f"match table maps {entity!r} to unknown concept "
                                    f"{concept!r} of ontology {ont!r}")


def match_concept(table: ConceptMatchTable, entity: str, ontology: str) -> str | None:
    return table.match(entity, ontology)


@dataclass
class OntologyBundle:
    """A parsed ontology with its augmented DAG and canonical model."""

    doc: OntologyDoc
    dag: ConceptDag
    model: CanonicalModel

    @property
    def id(self) -> str:
        return self.doc.id

    @classmethod
    def build(cls, doc: OntologyDoc) -> "OntologyBundle":
        model = build_canonical_model(doc)
        return cls(doc, add_negations(classify(doc), model), model)

    @classmethod
    def load(cls, path: str | Path) -> "OntologyBundle":
        return cls.build(load_ontology(path))


def build_bundles(docs: Iterable[OntologyDoc | OntologyBundle]) -> list[OntologyBundle]:
    out = [d if isinstance(d, OntologyBundle) else OntologyBundle.build(d) for d in docs]
    ids = [b.id for b in out]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise OntologyError(f"duplicate ontology id(s): {dupes}")
    return sorted(out, key=lambda b: b.id)


@dataclass
class VerdictReport:
    triplet: Triplet
    label: bool
    thresholds_subject: RankThresholds
    thresholds_object: RankThresholds
    object_rank: int | None
    subject_rank: int | None
    truth_paths: list = field(default_factory=list)
    object_candidates: list[Candidate] = field(default_factory=list)
    subject_candidates: list[Candidate] = field(default_factory=list)
    attempts: list[Extraction] = field(default_factory=list)
    evidence: EvidenceSet | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if self.label:
            return EXIT_TRUE
        return EXIT_FALSE_WITH_EVIDENCE if self.evidence is not None else EXIT_FALSE_NO_EVIDENCE

    @property
    def outcome(self) -> str:
        return {EXIT_TRUE: "true", EXIT_FALSE_WITH_EVIDENCE: "false-with-evidence",
                EXIT_FALSE_NO_EVIDENCE: "false-without-evidence"}[self.exit_code]

    def to_dict(self) -> dict:
        def cands(cs):
            return [{"entity": c.entity, "score": c.score, "rank": c.rank} for c in cs]

        return {
            "version": REPORT_VERSION,
            "triplet": {"subject": self.triplet.subject, "relation": self.triplet.relation,
                        "object": self.triplet.object},
            "label": "true" if self.label else "false",
            "outcome": self.outcome,
            "exit_code": self.exit_code,
            "object_rank": self.object_rank,
            "subject_rank": self.subject_rank,
            "thresholds": {"object": self.thresholds_object.to_dict(),
                           "subject": self.thresholds_subject.to_dict()},
            "truth_paths": [tp.to_dict() for tp in self.truth_paths],
            "object_candidates": cands(self.object_candidates),
            "subject_candidates": cands(self.subject_candidates),
            "attempts": [a.to_dict() for a in self.attempts],
            "evidence": None if self.evidence is None else self.evidence.to_dict(),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def _side(bundle: OntologyBundle, table: ConceptMatchTable, anchor: str,
          candidates: Sequence[Candidate], kind: str, config: Config,
          warnings: list[str]) -> Extraction | None:
    target = table.match(anchor, bundle.id)
    if target is None:
        return None
    concepts = []
    for c in candidates:
        concept = table.match(c.entity, bundle.id)
        if concept is None:
            warnings.append(f"{kind} candidate {c.entity!r} has no concept in {bundle.id}; dropped")
        else:
            concepts.append(concept)
    result = extract_evidence(bundle.dag, bundle.model, target, concepts, kind, bundle.id,
                              method=config.sup_method, omega_mode=config.omega_mode,
                              exact_limit=config.exact_cover_limit)
    for c, why in result.rejected:
        warnings.append(f"{kind} candidate concept {c!r} dropped in {bundle.id}: {why}")
    return result


def run_pipeline(kg: KnowledgeGraph, models: Mapping[str, PraModel],
                 ontologies: Sequence[OntologyDoc | OntologyBundle],
                 table: ConceptMatchTable, triplet: Triplet,
                 config: Config | None = None) -> VerdictReport:
    config = config or Config()
    model = models.get(triplet.relation)
    if model is None:
        raise MissingModelError(f"no PRA model for relation {triplet.relation!r}")
    bundles = build_bundles(ontologies)
    table.validate(bundles)
    s, o = triplet.subject, triplet.object
    fwd = rank_candidates(model, kg, s, FORWARD)
    bwd = rank_candidates(model, kg, o, BACKWARD)
    th_o = thresholds_for(model, kg, s, FORWARD, fwd, config.threshold_offset)
    th_s = thresholds_for(model, kg, o, BACKWARD, bwd, config.threshold_offset)
    v = verdict(model, kg, triplet, th_s, th_o, fwd, bwd, config.truth_paths)
    report = VerdictReport(triplet, v.label, th_s, th_o, v.object_rank, v.subject_rank,
                           v.truth_paths)
    for name, th in (("object", th_o), ("subject", th_s)):
        if th.clamped:
            report.warnings.append(f"{name} rank threshold clamped to 1")
    if v.label:
        return report
    report.object_candidates = candidate_set(fwd, th_o)
    report.subject_candidates = candidate_set(bwd, th_s)
    per_ontology = []
    for bundle in bundles:
        obj = _side(bundle, table, o, report.object_candidates, OBJECT, config, report.warnings)
        subj = _side(bundle, table, s, report.subject_candidates, SUBJECT, config,
                     report.warnings)
        for att in (obj, subj):
            if att is not None:
                report.attempts.append(att)
        per_ontology.append((bundle.id, obj and obj.evidence, subj and subj.evidence))
    try:
        report.evidence = select_best_evidence(per_ontology)
    except NoEvidenceError:
        report.warnings.append("no matching ontology produced evidence")
    return report


# ---------------------------------------------------------------- stats

def report_stats(reports: Sequence[VerdictReport | Mapping]) -> dict:
    """Per-relation truth statistics and evidence compression."""
    if not reports:
        raise ValueError("no reports")
    rows: dict[str, dict] = {}
    all_obar, all_alpha = [], []
    for rep in reports:
        d = rep.to_dict() if isinstance(rep, VerdictReport) else rep
        rel = d["triplet"]["relation"]
        row = rows.setdefault(rel, {"count": 0, "false": 0, "obar": [], "alpha": []})
        row["count"] += 1
        if d["label"] == "false":
            row["false"] += 1
            row["obar"].append(len(d["object_candidates"]))
            all_obar.append(len(d["object_candidates"]))
            ev = d.get("evidence")
            if ev is not None:
                row["alpha"].append(ev["cardinality"])
                all_alpha.append(ev["cardinality"])

    def mean(xs):
        return sum(xs) / len(xs) if xs else None

    relations = []
    for rel in sorted(rows):
        r = rows[rel]
        relations.append({"relation": rel, "count": r["count"],
                          "false_proportion": r["false"] / r["count"],
                          "avg_object_candidates": mean(r["obar"]),
                          "avg_evidence": mean(r["alpha"])})
    avg_o, avg_a = mean(all_obar), mean(all_alpha)
    return {
        "relations": relations,
        "total": len(reports),
        "false": sum(r["false"] for r in rows.values()),
        "avg_object_candidates": avg_o,
        "avg_evidence": avg_a,
        "compression": (avg_o / avg_a) if avg_o is not None and avg_a else None,
    }


def format_stats(summary: Mapping) -> str:
    """Aligned-column text rendering of :func:`report_stats` output."""
    def fmt(x):
        return "-" if x is None else (f"{x:.2f}" if isinstance(x, float) else str(x))

    header = ("relation", "count", "false_prop", "avg_Obar", "avg_alpha")
    body = [(r["relation"], r["count"], r["false_proportion"], r["avg_object_candidates"],
             r["avg_evidence"]) for r in summary["relations"]]
    body.append(("ALL", summary["total"], summary["false"] / summary["total"],
                 summary["avg_object_candidates"], summary["avg_evidence"]))
    cells = [header] + [tuple(fmt(x) for x in row) for row in body]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                       for i, (c, w) in enumerate(zip(row, widths))) for row in cells]
    lines.append(f"compression avg|Obar|/avg|alpha| = {fmt(summary['compression'])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- fixtures

def data_path(name: str) -> Path:
    """Path of a bundled data file (``geo.ont``, ``geo_kg.tsv``, ``geo_match.tsv``,
    ``report.schema.json``)."""
    path = Path(str(resources.files("truthval") / "data" / name))
    if not path.is_file():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return path

"""Command-line entry point: ``truthval <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .augment import add_negations
from .evidence import OBJECT, SUBJECT, extract_evidence
from .kg import KGFormatError, Triplet, filter_kg, load_kg, rank_fractions
from .ontology import OntologyError, build_canonical_model, classify, load_ontology
from .pipeline import (EXIT_MALFORMED, EXIT_NO_MODEL, ConceptMatchTable, Config,
                       MissingModelError, format_stats, report_stats, run_pipeline)
from .pra import NoFeaturesError, PraModel, evaluate, score, train_pra

log = logging.getLogger("truthval")


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _dump_json(obj, output: str | None) -> None:
    _emit(json.dumps(obj, sort_keys=True, ensure_ascii=False, indent=2) + "\n", output)


def _config(args) -> Config:
    cfg = Config.load(args.config) if args.config else Config()
    return cfg.updated({"seed": args.seed, "max_path_len": args.max_path_len,
                        "top_fraction": args.top_fraction,
                        "exact_cover_limit": args.exact_cover_limit})


def _load_models(paths) -> dict[str, PraModel]:
    models = {}
    for p in paths or ():
        m = PraModel.load(p)
        models[m.relation] = m
    return models


def _need(args, *names: str) -> None:
    missing = [n for n in names if not getattr(args, n)]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ValueError(f"missing required option(s): {flags}")


# ---------------------------------------------------------------- commands

def cmd_ingest(args) -> int:
    _need(args, "kg")
    kg = load_kg(args.kg)
    _emit(kg.dumps(), args.output)
    log.info("%d entities, %d relations, %d edges", len(kg.entities), len(kg.relations), len(kg))
    return 0


def cmd_train(args) -> int:
    _need(args, "kg")
    cfg = _config(args)
    kg = load_kg(args.kg)
    relations = args.relation or sorted(kg.relations)
    out_dir = Path(args.output or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    for rel in relations:
        try:
            model = train_pra(kg, rel, cfg.negatives_per_positive, cfg.l2, cfg.seed,
                              cfg.max_path_len, cfg.min_support, cfg.epochs)
        except NoFeaturesError as exc:
            log.warning("skipping %s: %s", rel, exc)
            continue
        target = out_dir / f"{rel.replace('/', '_')}.pra"
        model.dump(target)
        print(f"{rel}\t{len(model.features)} features\t{target}")
    return 0


def cmd_filter_kg(args) -> int:
    _need(args, "kg")
    cfg = _config(args)
    kg = load_kg(args.kg)
    models = _load_models(args.model)
    scorer = {rel: (lambda s, o, m=m: score(m, kg, s, o)) for rel, m in models.items()}
    kept = filter_kg(kg, rank_fractions(kg, scorer), cfg.top_fraction,
                     args.whitelist or (), args.ban_tag or ())
    _emit(kept.dumps(), args.output)
    log.info("kept %d of %d triplets", len(kept), len(kg))
    return 0


def cmd_classify(args) -> int:
    _need(args, "ontology")
    chunks = []
    for p in args.ontology:
        doc = load_ontology(p)
        dag = classify(doc)
        if args.augment:
            dag = add_negations(dag, build_canonical_model(doc))
        chunks.append(dag.to_dot(doc.id))
    _emit("".join(chunks), args.output)
    return 0


def cmd_verify(args) -> int:
    _need(args, "kg", "ontology", "match_table")
    cfg = _config(args)
    models = _load_models(args.model)
    report = run_pipeline(load_kg(args.kg), models, [load_ontology(p) for p in args.ontology],
                          ConceptMatchTable.load(args.match_table),
                          Triplet(args.subject, args.relation, args.object), cfg)
    for w in report.warnings:
        log.warning("%s", w)
    _emit(report.to_json(), args.output)
    return report.exit_code


def cmd_evidence(args) -> int:
    _need(args, "ontology")
    if len(args.ontology) != 1:
        raise ValueError("evidence takes exactly one --ontology")
    cfg = _config(args)
    doc = load_ontology(args.ontology[0])
    model = build_canonical_model(doc)
    dag = add_negations(classify(doc), model)
    res = extract_evidence(dag, model, args.target, args.candidates, args.kind, doc.id,
                           cfg.sup_method, cfg.omega_mode, cfg.exact_cover_limit)
    _dump_json(res.to_dict(), args.output)
    return 0 if res.evidence is not None else 4


def cmd_eval(args) -> int:
    _need(args, "kg", "held_out")
    held = load_kg(args.held_out)
    kg = load_kg(args.kg)
    models = _load_models(args.model)
    results = {}
    for rel in sorted(held.relations):
        if rel not in models:
            raise MissingModelError(f"no PRA model for relation {rel!r}")
        results[rel] = evaluate(models[rel], kg, held.triplets_of(rel))
    _dump_json(results, args.output)
    return 0


def cmd_stats(args) -> int:
    reports = []
    for p in args.reports:
        data = json.loads(Path(p).read_text(encoding="utf-8"))
        reports.extend(data if isinstance(data, list) else [data])
    summary = report_stats(reports)
    if args.text:
        _emit(format_stats(summary), args.output)
    else:
        _dump_json(summary, args.output)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--kg", metavar="PATH")
    common.add_argument("--model", metavar="PATH", action="append")
    common.add_argument("--ontology", metavar="PATH", action="append")
    common.add_argument("--match-table", metavar="PATH")
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--seed", type=int)
    common.add_argument("--max-path-len", type=int)
    common.add_argument("--top-fraction", type=float)
    common.add_argument("--exact-cover-limit", type=int)
    common.add_argument("--output", metavar="PATH")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="truthval",
                                     description="Validate triplets against a KG and explain "
                                                 "false ones with ontology evidence.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="normalize and deduplicate a KG file")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", parents=[common], help="train per-relation PRA models")
    p.add_argument("--relation", action="append", help="relation to train (default: all)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("filter-kg", parents=[common], help="keep top-ranked or whitelisted triplets")
    p.add_argument("--whitelist", metavar="PATH", action="append")
    p.add_argument("--ban-tag", metavar="TAG", action="append")
    p.set_defaults(func=cmd_filter_kg)

    p = sub.add_parser("classify", parents=[common], help="emit the subsumption DAG as DOT")
    p.add_argument("--augment", action="store_true", help="include negation/artificial nodes")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("verify", parents=[common], help="judge a triplet and explain if false")
    p.add_argument("subject")
    p.add_argument("relation")
    p.add_argument("object")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evidence", parents=[common], help="evidence for concept-level inputs")
    p.add_argument("--target", required=True, help="concept of the disputed entity")
    p.add_argument("--kind", choices=[OBJECT, SUBJECT], default=OBJECT)
    p.add_argument("candidates", nargs="+", help="candidate concepts")
    p.set_defaults(func=cmd_evidence)

    p = sub.add_parser("eval", parents=[common], help="filtered MRR/MAP on held-out triplets")
    p.add_argument("--held-out", metavar="PATH")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("stats", parents=[common], help="summarize verdict reports")
    p.add_argument("--text", action="store_true", help="aligned text instead of JSON")
    p.add_argument("reports", nargs="+", help="report JSON files")
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except MissingModelError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_NO_MODEL
    except (KGFormatError, OntologyError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_MALFORMED


if __name__ == "__main__":
    sys.exit(main())

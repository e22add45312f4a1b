"""Command-line entry points: recommend, evaluate, serve, export-graph.

Exit codes: 0 success, 1 computation error, 2 input/schema error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .aggregate import SEED_ENV_VAR, AggregationSpec
from .core import IncompleteFingerprint, ProblemFingerprint
from .evaluate import EvaluationError, evaluate_pool
from .io import SchemaError, canonical_json, load_dataset, save_json
from .recommend import MetricPool, Session, export_graph, recommend
from .cheatsheets import METRIC_REGISTRY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imgval",
        description="Validation-metrics engine and problem-aware metric "
                    "recommender for image analysis tasks")
    sub = parser.add_subparsers(dest="command", required=True)

    p_rec = sub.add_parser("recommend", help="turn a problem fingerprint "
                                             "into a metric pool")
    source = p_rec.add_mutually_exclusive_group(required=True)
    source.add_argument("--fingerprint", type=Path,
                        help="fingerprint JSON file")
    source.add_argument("--interactive", action="store_true",
                        help="answer the fingerprint questions on the "
                             "terminal")
    source.add_argument("--answers-from", type=Path,
                        help="replay a session transcript JSON file")
    p_rec.add_argument("--resolve", action="append", default=[],
                       metavar="GUIDE=OPTION",
                       help="resolve a decision guide, e.g. DG6.1=dsc")
    p_rec.add_argument("--out", type=Path, help="write the pool JSON here")

    p_eval = sub.add_parser("evaluate", help="apply a metric pool to a "
                                             "dataset")
    p_eval.add_argument("--data", type=Path, required=True)
    p_eval.add_argument("--pool", type=Path, required=True)
    p_eval.add_argument("--agg", type=Path,
                        help="aggregation spec JSON (optional)")
    p_eval.add_argument("--out", type=Path, required=True,
                        help="output directory for report and tables")
    p_eval.add_argument("--resolve-defaults", action="store_true",
                        help="resolve open guide choices to their "
                             "recommended defaults")

    p_serve = sub.add_parser("serve", help="run the HTTP facade")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--host", default="127.0.0.1")

    p_graph = sub.add_parser("export-graph",
                             help="write the decision graph as JSON")
    p_graph.add_argument("--out", type=Path, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "recommend":
            return _cmd_recommend(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "export-graph":
            save_json(args.out, export_graph())
            return 0
    except (SchemaError, IncompleteFingerprint, EvaluationError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


# ---------------------------------------------------------------------------
# recommend
# ---------------------------------------------------------------------------


def _cmd_recommend(args) -> int:
    if args.interactive:
        session = _interactive_session()
        pool = session.pool()
    elif args.answers_from:
        transcript = json.loads(Path(args.answers_from).read_text())
        session = Session.replay(transcript)
        pool = session.pool()
    else:
        fingerprint = ProblemFingerprint.from_json(
            json.loads(Path(args.fingerprint).read_text()))
        pool = recommend(fingerprint)
    for spec in args.resolve:
        key, _, option = spec.partition("=")
        if not option:
            raise ValueError(f"--resolve expects GUIDE=OPTION, got {spec!r}")
        pool.resolve_guide(key, option)
    document = canonical_json(pool.to_json())
    if args.out:
        Path(args.out).write_text(document + "\n")
    else:
        print(document)
    print(_pool_summary(pool), file=sys.stderr)
    return 0


def _interactive_session() -> Session:
    session = Session()
    while True:
        question = session.next_question()
        if question is None:
            break
        print(f"\n{question.prompt}")
        print(f"  (why: {question.why})")
        if question.kind == "bool":
            raw = input("  [y/n] > ").strip().lower()
            value = raw in ("y", "yes", "true", "1")
        elif question.kind == "enum":
            for i, option in enumerate(question.domain):
                print(f"  {i}: {option}")
            value = question.domain[int(input("  choice > "))]
        else:
            value = int(input("  number > "))
        session.answer(question.item, value)
    return session


def _pool_summary(pool: MetricPool) -> str:
    lines = [f"category: {pool.category.value}  "
             f"(graph version {pool.version})"]

    def describe(entry) -> str:
        info = METRIC_REGISTRY.get(entry.metric)
        name = info.name if info else entry.metric
        bits = [name]
        if info and info.acronym:
            bits.append(f"[{info.acronym}]")
        if entry.optional:
            bits.append("(optional)")
        if entry.params:
            shown = {k: v for k, v in entry.params.items() if k != "_anchor"}
            if shown:
                bits.append(json.dumps(shown, sort_keys=True))
        text = " ".join(bits)
        if info and info.notes:
            text += f"\n      note: {info.notes[0]}"
        return text

    if pool.multi_class:
        lines.append("multi-class metrics:")
        lines += [f"  - {describe(e)}" for e in pool.multi_class]
    for cls, entries in sorted(pool.per_class.items()):
        lines.append(f"class {cls} metrics:")
        lines += [f"  - {describe(e)}" for e in entries]
    if pool.calibration:
        lines.append("calibration metrics:")
        lines += [f"  - {describe(e)}" for e in pool.calibration]
    if pool.detection.get("criterion"):
        lines.append(f"localization criterion: {pool.detection['criterion']}")
        lines.append(f"assignment: {pool.detection.get('assignment')}")
        if pool.detection.get("thresholds"):
            lines.append(f"thresholds: {pool.detection['thresholds']} "
                         f"({pool.detection.get('threshold_policy')})")
    for guide in pool.pending_guides:
        options = ", ".join(o["id"] + ("*" if o.get("recommended") else "")
                            for o in guide.options)
        lines.append(f"open choice {guide.key}: {options}")
    for w in pool.warnings:
        lines.append(f"warning: {w['message']}")
    for n in pool.notes:
        lines.append(f"note: {n}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def _cmd_evaluate(args) -> int:
    dataset = load_dataset(args.data)
    pool = MetricPool.from_json(json.loads(Path(args.pool).read_text()))
    agg = None
    if args.agg:
        agg = AggregationSpec.from_json(json.loads(Path(args.agg).read_text()))
    seed = int(os.environ.get(SEED_ENV_VAR, "0"))
    report = evaluate_pool(dataset, pool, agg=agg, seed=seed,
                           resolve_default_guides=args.resolve_defaults)
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    save_json(out / "report.json", report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    for name, csv in report.curves.items():
        safe = name.replace(":", "_").replace("|", "_").replace("/", "_")
        (out / f"curve_{safe}.csv").write_text(csv)
    if report.match_traces:
        save_json(out / "match_traces.json", report.match_traces)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"report written to {out}")
    return 0


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


def _cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())

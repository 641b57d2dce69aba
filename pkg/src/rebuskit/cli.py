"""Command line pipeline: parse -> render -> distract -> build -> eval / serve."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import benchmark as benchmark_mod
from . import render as render_mod
from .distractors import (
    PrecomputedProvider,
    SimilarityConfig,
    TrigramProvider,
    sample_distractors,
)
from .evaluation import HttpSolver, RandomSolver, score_run
from .graph import RebusGraph, load_graphs
from .parser import EmptyPhraseError, parse_compound, parse_phrase

log = logging.getLogger(__name__)


def _read_corpus(path: str | Path) -> list[list[str]]:
    rows = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        rows.append(line.split("\t"))
    return rows


def _truthy(cell: str) -> bool:
    return cell.strip().lower() in ("1", "true", "yes")


def cmd_parse(args) -> int:
    rows = _read_corpus(args.input)
    records = []
    seen = set()
    for row in rows:
        answer = row[0].strip()
        try:
            if args.compounds:
                if len(row) < 3:
                    log.warning("skipping malformed compound row: %r", row)
                    continue
                c1, c2 = row[1].strip(), row[2].strip()
                is_plural = _truthy(row[3]) if len(row) > 3 else None
                if is_plural is None:
                    from .taxonomy import default_taxonomy

                    is_plural = default_taxonomy().is_plural(c2)
                graphs = parse_compound(c1, c2, is_plural, answer=answer)
            else:
                graphs = parse_phrase(answer)
        except EmptyPhraseError as exc:
            log.warning("skipping %r: %s", answer, exc)
            continue
        for g in graphs:
            pid = benchmark_mod.graph_id(g)
            if pid in seen:
                continue
            seen.add(pid)
            rec = g.to_dict()
            rec["id"] = pid
            records.append(rec)
    Path(args.output).write_text(
        json.dumps(records, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    print(f"parsed {len(rows)} answers into {len(records)} graphs -> {args.output}")
    return 0


def cmd_render(args) -> int:
    config = render_mod.RenderConfig.from_toml(args.config) if args.config else None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failures = {}
    n_ok = 0
    for pid, graph in load_graphs(args.graphs):
        pid = pid or benchmark_mod.graph_id(graph)
        try:
            render_mod.render_to_files(graph, out_dir, pid, config)
            n_ok += 1
        except render_mod.RenderError as exc:
            failures[pid] = str(exc)
    if failures:
        (out_dir / "render_failures.json").write_text(
            json.dumps(failures, indent=2), encoding="utf-8"
        )
    print(f"rendered {n_ok} graphs into {out_dir} ({len(failures)} failures)")
    return 0


def cmd_distract(args) -> int:
    pool = [row[0].strip() for row in _read_corpus(args.pool)]
    provider = PrecomputedProvider(args.embeddings) if args.embeddings else TrigramProvider()
    cfg = SimilarityConfig(lam=args.lam, provider=provider, seed=args.seed)
    questions = {}
    for pid, graph in load_graphs(args.graphs):
        pid = pid or benchmark_mod.graph_id(graph)
        options = sample_distractors(graph, pool, cfg)
        questions[pid] = options.to_dict()
    Path(args.out).write_text(
        json.dumps(questions, ensure_ascii=False, indent=2), encoding="utf-8"
    )
    print(f"sampled distractors for {len(questions)} puzzles -> {args.out}")
    return 0


def cmd_build(args) -> int:
    from .distractors import QuestionOptions

    graphs_with_ids = []
    for pid, graph in load_graphs(args.graphs):
        graphs_with_ids.append((pid or benchmark_mod.graph_id(graph), graph))
    raw = json.loads(Path(args.questions).read_text(encoding="utf-8"))
    questions = {pid: QuestionOptions.from_dict(q) for pid, q in raw.items()}
    stats = benchmark_mod.build_benchmark(
        graphs_with_ids, args.images, questions, args.top_k, args.out
    )
    totals = stats.to_dict()["all"]
    print(
        f"built benchmark at {args.out}: {totals['puzzles']} puzzles "
        f"({totals['overlap_pairs']} overlap pairs)"
    )
    return 0


def cmd_eval(args) -> int:
    partitions = benchmark_mod.load_benchmark(args.benchmark)
    puzzles = partitions["text"] + partitions["icon"]
    if args.solver == "mock":
        solver = RandomSolver(args.seed)
    elif args.solver.startswith("http:"):
        solver = HttpSolver(args.solver.removeprefix("http:"), image_dir=args.benchmark)
    else:
        print(f"unknown solver {args.solver!r}; use 'mock' or 'http:<url>'", file=sys.stderr)
        return 2
    seeds = [args.seed + i for i in range(args.runs)]
    run = score_run(puzzles, solver, args.level, seeds)
    Path(args.report).write_text(
        json.dumps(run.to_dict(), indent=2, ensure_ascii=False), encoding="utf-8"
    )
    print(
        f"{run.solver} @ level {args.level}: "
        f"mean accuracy {100 * run.mean_accuracy:.2f}% (SD {100 * run.sd_accuracy:.2f}) "
        f"over {len(puzzles)} puzzles x {args.runs} runs -> {args.report}"
    )
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .quiz import create_app

    app = create_app(args.benchmark, args.data_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_arg_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rebuskit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a corpus into candidate rebus graphs")
    p.add_argument("--input", required=True, help="corpus TSV")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--compounds", action="store_true",
                      help="rows are answer<TAB>c1<TAB>c2<TAB>is_plural")
    mode.add_argument("--phrases", action="store_true", help="rows are answers (default)")
    p.add_argument("--output", required=True, help="graphs.json to write")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("render", help="render graphs to 400x400 puzzle images")
    p.add_argument("--graphs", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--config", help="render settings TOML")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("distract", help="sample multiple-choice distractors")
    p.add_argument("--graphs", required=True)
    p.add_argument("--pool", required=True, help="candidate answers TSV")
    p.add_argument("--lambda", dest="lam", type=float, default=0.8,
                   help="word-overlap weight (default 0.8)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--embeddings", help="precomputed embedding vectors file")
    p.add_argument("--out", required=True, help="questions.json to write")
    p.set_defaults(func=cmd_distract)

    p = sub.add_parser("build", help="assemble the filtered, ranked benchmark")
    p.add_argument("--graphs", required=True)
    p.add_argument("--images", required=True, help="directory produced by `render`")
    p.add_argument("--questions", required=True, help="questions.json from `distract`")
    p.add_argument("--top-k", type=int, default=1000)
    p.add_argument("--out", required=True, help="benchmark output directory")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("eval", help="evaluate a solver on a built benchmark")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--solver", default="mock", help="mock | http:<url>")
    p.add_argument("--level", type=int, default=2, choices=(1, 2, 3, 4))
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--report", required=True, help="report JSON to write")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="serve the human quiz API")
    p.add_argument("--benchmark", required=True)
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--data-dir", default="runs", help="session answer logs")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_arg_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

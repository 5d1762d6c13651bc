"""Command line entry point: ``adjsig {pool,adjudicate,significance,evaluate,report}``.

Exit status is 0 on success, 1 for invalid input or configuration and 2 for
I/O failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import adjudication as adj
from .errors import StageError, ValidationError
from .harness import (RESULTS_FILE, ExperimentResult, load_config, config_from_mapping, pool_stats,
                      run_experiment, split_pooled_nonpooled, parse_system_list)
from .measures import Measure, score_matrix
from .reports import render_reports
from .significance import SignificanceConfig, significant_pairs, tukey_hsd
from .trec_io import read_qrels, read_runs, write_qrels

log = logging.getLogger("adjsig")


def _add_common(p: argparse.ArgumentParser, qrels_required: bool = True) -> None:
    p.add_argument("--runs", required=True, help="run file or directory of run files")
    p.add_argument("--qrels", required=qrels_required, help="gold qrels file")
    p.add_argument("--out", required=True, help="output directory")


def _pooling(runs, arg):
    systems = parse_system_list(arg) or runs.systems
    split_pooled_nonpooled(runs, systems)
    return runs.subset(systems)


def cmd_pool(args) -> int:
    runs = read_runs(args.runs)
    pools = adj.build_pools(_pooling(runs, args.pooling_systems), args.depth)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "pool.txt", "w", encoding="utf-8") as fh:
        for p in pools:
            for doc in sorted(p.candidates):
                fh.write(f"{p.topic} {doc}\n")
    if args.qrels:
        gold = read_qrels(args.qrels)
        stats = pool_stats(pools, gold)
        with open(out / "pool.qrels", "w", encoding="utf-8") as fh:
            write_qrels(adj.pool_qrels(pools, gold), fh)
    else:
        sizes = [len(p) for p in pools]
        stats = {"topics": len(pools), "total": sum(sizes), "mean": sum(sizes) / max(len(sizes), 1),
                 "max": max(sizes, default=0), "min": min(sizes, default=0)}
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_adjudicate(args) -> int:
    runs = read_runs(args.runs)
    gold = read_qrels(args.qrels)
    pools = adj.build_pools(_pooling(runs, args.pooling_systems), args.depth, gold.topics)
    method = adj.MethodConfig(adj.MethodKind.parse(args.method), rng_seed=args.seed, decay=args.decay,
                              hedge_beta=args.hedge_beta, ntcir_depth=args.ntcir_depth,
                              random_ties=args.random_ties)
    traces = adj.adjudicate_all(method, pools, gold, args.budget, args.repetition)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "trace.csv", "w", encoding="utf-8") as fh:
        adj.write_traces(traces, fh)
    reduced = adj.trace_to_qrels(traces)
    with open(out / "qrels.txt", "w", encoding="utf-8") as fh:
        write_qrels(reduced, fh)
    print(json.dumps({"judged": len(reduced), "relevant": reduced.num_relevant(1)}, sort_keys=True))
    return 0


def cmd_significance(args) -> int:
    runs = read_runs(args.runs)
    gold = read_qrels(args.qrels)
    systems = list(parse_system_list(args.eval_systems) or runs.systems)
    measure = Measure.parse(args.measure)
    X = score_matrix(runs, gold, measure, systems, gold.topics)
    cfg = SignificanceConfig(args.alpha, args.permutations, args.seed)
    p = tukey_hsd(X, cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "scores.csv", "w", encoding="utf-8") as fh:
        X.to_csv(fh)
    with open(out / "pvalues.csv", "w", encoding="utf-8") as fh:
        p.to_csv(fh)
    sig = significant_pairs(p, args.alpha)
    print(json.dumps({"pairs": len(systems) * (len(systems) - 1) // 2, "significant": len(sig)}, sort_keys=True))
    return 0


def cmd_evaluate(args) -> int:
    overrides = {
        "runs": args.runs, "qrels": args.qrels, "depth": args.depth, "budgets": args.budget,
        "methods": args.method, "measures": args.measure, "alpha": args.alpha,
        "permutations": args.permutations, "seed": args.seed, "repetitions": args.repetitions,
        "pooling_systems": args.pooling_systems, "eval_systems": args.eval_systems, "out": args.out,
        "workers": args.workers,
    }
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = config_from_mapping(overrides)
    result = run_experiment(cfg)
    for measure, info in result.gold.items():
        log.info("%s: %d of %d pairs significant under gold", measure, info["n_sig"], info["n_pairs"])
    print(json.dumps({"out": cfg.output_dir, "pools": result.pools,
                      "gold_significant": {m: g["n_sig"] for m, g in result.gold.items()}}, sort_keys=True))
    return 0


def cmd_report(args) -> int:
    out = Path(args.out)
    result = ExperimentResult.from_json((out / RESULTS_FILE).read_text(encoding="utf-8"))
    formats = args.format or ["csv", "markdown"]
    for path in render_reports(result, out, formats):
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adjsig", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pool", help="build depth-k pools and dump them")
    _add_common(p, qrels_required=False)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--pooling-systems")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("adjudicate", help="run one adjudication method and write its trace and qrels")
    _add_common(p)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetition", type=int, default=0, help="repetition index for the random stream")
    p.add_argument("--pooling-systems")
    p.add_argument("--decay", type=float, default=0.99)
    p.add_argument("--hedge-beta", type=float, default=0.1)
    p.add_argument("--ntcir-depth", type=int)
    p.add_argument("--random-ties", action="store_true")
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("significance", help="score matrix and Tukey HSD p-values")
    _add_common(p)
    p.add_argument("--measure", default="AP")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--permutations", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-systems")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_significance)

    p = sub.add_parser("evaluate", help="full experiment from a config file and/or flags")
    p.add_argument("--config", help="YAML/JSON file of flat keys; flags override it")
    p.add_argument("--runs")
    p.add_argument("--qrels")
    p.add_argument("--out")
    p.add_argument("--depth", type=int)
    p.add_argument("--budget", help="comma-separated budgets per topic")
    p.add_argument("--method", help="comma-separated methods")
    p.add_argument("--measure", help="comma-separated measures")
    p.add_argument("--alpha", type=float)
    p.add_argument("--permutations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--pooling-systems")
    p.add_argument("--eval-systems")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="re-render tables from a stored results.json")
    p.add_argument("--out", required=True, help="results directory")
    p.add_argument("--format", action="append", choices=["csv", "markdown"])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        if isinstance(exc.cause, ValidationError):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        if isinstance(exc.cause, OSError):
            print(f"error: {exc}", file=sys.stderr)
            return 2
        raise
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

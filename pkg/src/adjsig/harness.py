"""End-to-end experiments: pool, adjudicate under budgets, test, compare, aggregate."""

from __future__ import annotations

import json
import logging
import multiprocessing
import shutil
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

import numpy as np
import yaml

from . import adjudication as adj
from .agreement import AgreementReport, build_triplets, compare, ma_values, report_from_mapping
from .errors import ConfigError, StageError, ValidationError
from .measures import Measure, ScoreMatrix, score_matrix
from .significance import SignificanceConfig, rank_systems, significant_pairs, tukey_hsd
from .trec_io import Qrels, RunSet, read_qrels, read_runs

log = logging.getLogger(__name__)

RESULTS_FILE = "results.json"

REPORT_FIELDS = ("aa", "ad", "ma_g", "ma_l", "md_g", "md_l", "precision", "recall", "tau", "bias",
                 "n_gold_sig", "n_low_sig", "insig_agree", "insig_disagree")


@dataclass(frozen=True)
class ExperimentConfig:
    runs_path: str
    gold_qrels_path: str
    pool_depth: int
    budgets: tuple[int, ...]
    methods: tuple[adj.MethodConfig, ...]
    measures: tuple[Measure, ...] = (Measure("AP"), Measure("NDCG"))
    significance: SignificanceConfig = field(default_factory=SignificanceConfig)
    pooling_systems: tuple[str, ...] | None = None  # None: every run
    evaluated_systems: tuple[str, ...] | None = None  # None: the pooling systems
    repetitions: int = 50  # applies to stochastic methods; deterministic ones run once
    output_dir: str = "results"
    workers: int = 1
    seed: int = 0
    restrict_gold_to_pool: bool = True
    ma_bin_size: int = 3
    directional: bool = True

    def __post_init__(self):
        if self.pool_depth < 1:
            raise ConfigError(f"pool depth must be >= 1, got {self.pool_depth}")
        if not self.budgets or any(b < 1 for b in self.budgets):
            raise ConfigError("budgets must be a non-empty list of positive integers")
        if any(b >= c for b, c in zip(self.budgets, self.budgets[1:])):
            raise ConfigError(f"budgets must be strictly increasing, got {list(self.budgets)}")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.pooling_systems is not None and not self.pooling_systems:
            raise ConfigError("pooling systems must not be empty")


def parse_system_list(value: Any) -> tuple[str, ...] | None:
    """Lists pass through; a string is a comma list or ``@file`` with one id per line."""
    if value is None:
        return None
    if isinstance(value, str):
        if value.startswith("@"):
            items = Path(value[1:]).read_text(encoding="utf-8").split()
        else:
            items = [v.strip() for v in value.split(",")]
        return tuple(v for v in items if v)
    return tuple(str(v) for v in value)


def _as_list(value: Any) -> list:
    if isinstance(value, str):
        return [v.strip() for v in value.split(",") if v.strip()]
    if isinstance(value, (list, tuple)):
        return list(value)
    return [value]


CONFIG_KEYS = {
    "runs", "qrels", "depth", "budget", "budgets", "method", "methods", "measure", "measures", "alpha",
    "permutations", "seed", "repetitions", "pooling_systems", "eval_systems", "out", "workers",
    "decay", "hedge_beta", "ntcir_depth", "random_ties", "rel_threshold", "restrict_gold_to_pool",
    "ma_bin_size", "directional",
}


def config_from_mapping(values: Mapping[str, Any]) -> ExperimentConfig:
    """Build a config from the flat key set shared by config files and CLI flags."""
    values = {k.replace("-", "_"): v for k, v in values.items() if v is not None}
    unknown = set(values) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for key in ("runs", "qrels", "depth"):
        if key not in values:
            raise ConfigError(f"missing required config key {key!r}")
    try:
        seed = int(values.get("seed", 0))
        method_kw = {k: values[k] for k in ("decay", "hedge_beta", "ntcir_depth", "random_ties") if k in values}
        methods = tuple(adj.MethodConfig(adj.MethodKind.parse(str(m)), rng_seed=seed, **method_kw)
                        for m in _as_list(values.get("methods", values.get("method", [k.value for k in adj.MethodKind]))))
        threshold = int(values.get("rel_threshold", 1))
        measures = tuple(replace(Measure.parse(str(m)), rel_threshold=threshold)
                         for m in _as_list(values.get("measures", values.get("measure", ["AP", "NDCG"]))))
        budgets = tuple(int(b) for b in _as_list(values.get("budgets", values.get("budget"))))
        return ExperimentConfig(
            runs_path=str(values["runs"]),
            gold_qrels_path=str(values["qrels"]),
            pool_depth=int(values["depth"]),
            budgets=budgets,
            methods=methods,
            measures=measures,
            significance=SignificanceConfig(float(values.get("alpha", 0.05)),
                                            int(values.get("permutations", 1_000_000)), seed),
            pooling_systems=parse_system_list(values.get("pooling_systems")),
            evaluated_systems=parse_system_list(values.get("eval_systems")),
            repetitions=int(values.get("repetitions", 50)),
            output_dir=str(values.get("out", "results")),
            workers=int(values.get("workers", 1)),
            seed=seed,
            restrict_gold_to_pool=bool(values.get("restrict_gold_to_pool", True)),
            ma_bin_size=int(values.get("ma_bin_size", 3)),
            directional=bool(values.get("directional", True)),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    """Read a YAML (or JSON) mapping of flat keys; ``overrides`` win over the file."""
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a mapping of keys to values")
    base = Path(path).parent
    for key in ("runs", "qrels"):
        if key in data and not Path(str(data[key])).is_absolute():
            data[key] = str(base / str(data[key]))
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(data)


def split_pooled_nonpooled(runs: RunSet, pooling_systems: Sequence[str]) -> tuple[list[str], list[str]]:
    if not pooling_systems:
        raise ValidationError("pooling systems must not be empty")
    unknown = [s for s in pooling_systems if s not in runs.entries]
    if unknown:
        raise ValidationError(f"unknown pooling systems: {', '.join(unknown)}")
    chosen = set(pooling_systems)
    pooled = [s for s in runs.systems if s in chosen]
    return pooled, [s for s in runs.systems if s not in chosen]


def budget_fraction(budget: int, pools: Sequence[adj.TopicPool]) -> float:
    if not pools:
        raise ValidationError("budget_fraction needs at least one pool")
    total = sum(len(p) for p in pools)
    if total == 0:
        return 1.0
    return min(1.0, budget * len(pools) / total)


def pool_stats(pools: Sequence[adj.TopicPool], gold: Qrels) -> dict:
    sizes = [len(p) for p in pools]
    relevant = sum(1 for p in pools for d in p.candidates if gold.topic(p.topic).get(d, 0) >= 1)
    return {
        "topics": len(pools),
        "total": int(sum(sizes)),
        "mean": float(np.mean(sizes)) if sizes else 0.0,
        "max": int(max(sizes, default=0)),
        "min": int(min(sizes, default=0)),
        "relevant": relevant,
    }


@contextmanager
def _stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


@dataclass
class _Context:
    cfg: ExperimentConfig
    runs: RunSet
    gold: Qrels
    pools: list[adj.TopicPool]
    topics: list[str]
    systems: list[str]
    gold_triplets: dict[str, Any]
    gold_rankings: dict[str, list[str]]


_CTX: _Context | None = None


def _init_worker(ctx: _Context) -> None:
    global _CTX
    _CTX = ctx


def _cell(key: tuple[int, int, int]) -> dict:
    """One (method, budget, repetition) cell, computed from the shared context."""
    ctx = _CTX
    assert ctx is not None
    mi, budget, rep = key
    method = ctx.cfg.methods[mi]
    traces = adj.adjudicate_all(method, ctx.pools, ctx.gold, budget, rep)
    low = adj.trace_to_qrels(traces)
    out = {"nrels": low.num_relevant(1), "judged": len(low), "measures": {}}
    for measure in ctx.cfg.measures:
        X = score_matrix(ctx.runs, low, measure, ctx.systems, ctx.topics)
        p = tukey_hsd(X, ctx.cfg.significance, workers=1)
        sig = significant_pairs(p, ctx.cfg.significance.alpha)
        triplets = build_triplets(X, sig)
        report, cls = compare(ctx.gold_triplets[measure.name], triplets, ctx.gold_rankings[measure.name],
                              rank_systems(X), ctx.cfg.directional)
        out["measures"][measure.name] = {
            "report": report.as_dict(),
            "ma": ma_values(ctx.gold_rankings[measure.name], X, cls.ma_pairs),
        }
    return out


def _aggregate(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


@dataclass
class ExperimentResult:
    """Everything needed to re-render reports; serialised as ``results.json``."""

    config: dict
    pools: dict
    gold: dict  # measure -> {n_pairs, n_sig, ranking}
    cells: list[dict]  # one per (method, budget, measure)

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "pools": self.pools, "gold": self.gold, "cells": self.cells},
                          indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> ExperimentResult:
        data = json.loads(text)
        return cls(data["config"], data["pools"], data["gold"], data["cells"])

    def cell(self, method: str, budget: int, measure: str) -> dict:
        for c in self.cells:
            if c["method"] == method and c["budget"] == budget and c["measure"] == measure:
                return c
        raise KeyError((method, budget, measure))

    def report(self, method: str, budget: int, measure: str) -> AgreementReport:
        """Mean report over repetitions (counts may be fractional)."""
        return report_from_mapping(self.cell(method, budget, measure)["mean"])


def _config_summary(cfg: ExperimentConfig) -> dict:
    return {
        "pool_depth": cfg.pool_depth,
        "budgets": list(cfg.budgets),
        "methods": [m.kind.label for m in cfg.methods],
        "measures": [m.name for m in cfg.measures],
        "alpha": cfg.significance.alpha,
        "permutations": cfg.significance.permutations,
        "seed": cfg.seed,
        "repetitions": cfg.repetitions,
        "ma_bin_size": cfg.ma_bin_size,
        "restrict_gold_to_pool": cfg.restrict_gold_to_pool,
        "directional": cfg.directional,
    }


def run_experiment(cfg: ExperimentConfig, runs: RunSet | None = None, gold: Qrels | None = None,
                   write: bool = True) -> ExperimentResult:
    with _stage("load"):
        if runs is None:
            runs = read_runs(cfg.runs_path)
        if gold is None:
            gold = read_qrels(cfg.gold_qrels_path)
        pooling = list(cfg.pooling_systems) if cfg.pooling_systems is not None else runs.systems
        split_pooled_nonpooled(runs, pooling)
        systems = list(cfg.evaluated_systems) if cfg.evaluated_systems is not None else sorted(pooling)
        unknown = [s for s in systems if s not in runs.entries]
        if unknown:
            raise ValidationError(f"unknown evaluated systems: {', '.join(unknown)}")
        if len(systems) < 2:
            raise ValidationError("need at least two evaluated systems")

    with _stage("pool"):
        topics = gold.topics
        if not topics:
            raise ValidationError("gold qrels contain no topics")
        pools = adj.build_pools(runs.subset(pooling), cfg.pool_depth, topics)
        if cfg.restrict_gold_to_pool:
            gold = gold.restrict({p.topic: p.candidates for p in pools})
        stats = pool_stats(pools, gold)
        stats["pairs"] = len(systems) * (len(systems) - 1) // 2

    gold_info: dict[str, dict] = {}
    gold_triplets = {}
    gold_rankings = {}
    with _stage("gold"):
        for measure in cfg.measures:
            X = score_matrix(runs, gold, measure, systems, topics)
            p = tukey_hsd(X, cfg.significance, workers=cfg.workers)
            sig = significant_pairs(p, cfg.significance.alpha)
            gold_triplets[measure.name] = build_triplets(X, sig)
            gold_rankings[measure.name] = rank_systems(X)
            gold_info[measure.name] = {
                "n_pairs": len(systems) * (len(systems) - 1) // 2,
                "n_sig": len(sig),
                "ranking": gold_rankings[measure.name],
                "means": [float(v) for v in X.means()],
                "systems": list(X.systems),
            }

    ctx = _Context(cfg, runs, gold, pools, topics, systems, gold_triplets, gold_rankings)
    keys = [(mi, b, rep) for mi, m in enumerate(cfg.methods) for b in cfg.budgets
            for rep in range(cfg.repetitions if m.stochastic else 1)]
    with _stage("adjudicate"):
        if cfg.workers > 1 and len(keys) > 1:
            # spawn: the OpenMP runtime behind the Tukey kernel is not fork-safe
            mp = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(cfg.workers, mp_context=mp, initializer=_init_worker,
                                     initargs=(ctx,)) as pool:
                outputs = dict(zip(keys, pool.map(_cell, keys)))
        else:
            _init_worker(ctx)
            outputs = {k: _cell(k) for k in keys}

    cells = []
    for mi, method in enumerate(cfg.methods):
        for budget in cfg.budgets:
            reps = [outputs[k] for k in keys if k[0] == mi and k[1] == budget]
            for measure in cfg.measures:
                per_rep = []
                ma = []
                for r in reps:
                    entry = dict(r["measures"][measure.name]["report"])
                    entry["nrels"] = r["nrels"]
                    per_rep.append(entry)
                    ma.extend(r["measures"][measure.name]["ma"])
                mean, std = {}, {}
                for f in REPORT_FIELDS + ("nrels",):
                    mean[f], std[f] = _aggregate([e[f] for e in per_rep])
                cells.append({
                    "method": method.kind.label,
                    "budget": budget,
                    "measure": measure.name,
                    "fraction": budget_fraction(budget, pools),
                    "repetitions": len(reps),
                    "mean": mean,
                    "std": std,
                    "reps": per_rep,
                    "ma": sorted([int(pos), float(v)] for pos, v in ma),
                })

    result = ExperimentResult(_config_summary(cfg), stats, gold_info, cells)
    if write:
        with _stage("report"):
            write_output_dir(result, cfg.output_dir)
    return result


def write_output_dir(result: ExperimentResult, out: str | Path) -> None:
    """Render into a sibling temp dir and swap it in, so failures leave nothing behind."""
    from .reports import render_reports

    out = Path(out)
    if out.exists() and any(out.iterdir()) and not (out / RESULTS_FILE).exists():
        raise ConfigError(f"{out} exists and does not look like a previous results directory")
    tmp = out.parent / f".{out.name}.partial"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir(parents=True)
    try:
        (tmp / RESULTS_FILE).write_text(result.to_json(), encoding="utf-8")
        render_reports(result, tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    if out.exists():
        shutil.rmtree(out)
    tmp.rename(out)

from __future__ import annotations

import numpy as np
import pytest

from adjsig.trec_io import Qrels, RunEntry, RunSet


def make_collection(n_runs=5, n_topics=5, n_docs=20, universe=40, seed=0, graded=False):
    """Synthetic runs over a shared doc universe; run quality varies so systems differ.

    Gold judgments cover every document any run retrieved.
    """
    rng = np.random.default_rng(seed)
    entries: dict[str, dict[str, tuple[RunEntry, ...]]] = {f"run{r}": {} for r in range(n_runs)}
    judgments: dict[str, dict[str, int]] = {}
    for t in range(n_topics):
        topic = str(401 + t)
        docs = [f"D{t:02d}-{d:03d}" for d in range(universe)]
        relevant = set(rng.choice(universe, size=universe // 4, replace=False))
        grades = {}
        for d in range(universe):
            grades[docs[d]] = (int(rng.integers(1, 3)) if graded else 1) if d in relevant else 0
        seen: set[str] = set()
        for r in range(n_runs):
            skill = 0.2 + 0.6 * r / max(n_runs - 1, 1)
            noise = rng.random(universe)
            score = np.array([(skill if grades[docs[d]] > 0 else 0.0) + noise[d] for d in range(universe)])
            order = np.argsort(-score, kind="stable")[:n_docs]
            ranked = tuple(RunEntry(docs[d], i + 1, float(n_docs - i)) for i, d in enumerate(order))
            entries[f"run{r}"][topic] = ranked
            seen.update(e.doc for e in ranked)
        judgments[topic] = {d: grades[d] for d in sorted(seen)}
    return RunSet(entries), Qrels(judgments)


@pytest.fixture
def collection():
    return make_collection()


_CRITERIA: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for name, value in getattr(report, "user_properties", []):
        if name == "criterion":
            _CRITERIA.setdefault(value, []).append(report.outcome)


@pytest.hookimpl(tryfirst=True)
def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker and ("criterion", marker.args[0]) not in item.user_properties:
        item.user_properties.append(("criterion", marker.args[0]))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        outcomes = _CRITERIA[n]
        if all(o == "passed" for o in outcomes):
            status = "PASS"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {n}: {status} ({len(outcomes)} checks)")


def write_collection(directory, **kwargs):
    """Write a synthetic collection as run files plus a qrels file; returns (runs_dir, qrels_path)."""
    from pathlib import Path

    from adjsig.trec_io import write_qrels

    directory = Path(directory)
    runs, gold = make_collection(**kwargs)
    run_dir = directory / "runs"
    run_dir.mkdir(parents=True, exist_ok=True)
    for system in runs.systems:
        with open(run_dir / f"{system}.txt", "w", encoding="utf-8") as fh:
            for topic, entries in runs.entries[system].items():
                for e in entries:
                    fh.write(f"{topic} Q0 {e.doc} {e.rank} {e.score} {system}\n")
    qrels = directory / "gold.qrels"
    with open(qrels, "w", encoding="utf-8") as fh:
        write_qrels(gold, fh)
    return run_dir, qrels

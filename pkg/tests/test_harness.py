import json

import pytest

from adjsig.adjudication import MethodConfig, MethodKind, build_pools
from adjsig.errors import ConfigError, StageError, ValidationError
from adjsig.harness import (ExperimentConfig, ExperimentResult, budget_fraction, config_from_mapping, load_config,
                            run_experiment, split_pooled_nonpooled, write_output_dir)
from adjsig.measures import Measure
from adjsig.reports import render_reports
from adjsig.significance import SignificanceConfig

from conftest import make_collection


def config(tmp_path, **kw):
    base = dict(runs_path="-", gold_qrels_path="-", pool_depth=10, budgets=(5, 400),
                methods=tuple(MethodConfig(k) for k in MethodKind), measures=(Measure("AP"),),
                significance=SignificanceConfig(permutations=2000), repetitions=2,
                output_dir=str(tmp_path / "out"))
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def small_result(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("exp")
    runs, gold = make_collection(n_runs=5, n_topics=4, seed=1)
    cfg = config(tmp)
    return cfg, run_experiment(cfg, runs, gold)


class TestSplit:
    def test_partition(self, collection):
        runs, _ = collection
        pooled, rest = split_pooled_nonpooled(runs, ["run3", "run1"])
        assert pooled == ["run1", "run3"]
        assert rest == ["run0", "run2", "run4"]
        assert split_pooled_nonpooled(runs, runs.systems)[1] == []

    def test_errors(self, collection):
        runs, _ = collection
        with pytest.raises(ValidationError):
            split_pooled_nonpooled(runs, [])
        with pytest.raises(ValidationError):
            split_pooled_nonpooled(runs, ["nope"])


def test_budget_fraction(collection):
    runs, _ = collection
    pools = build_pools(runs, 10)
    total = sum(len(p) for p in pools)
    assert budget_fraction(5, pools) == pytest.approx(5 * len(pools) / total)
    assert budget_fraction(10_000, pools) == 1.0
    with pytest.raises(ValidationError):
        budget_fraction(5, [])


def test_config_validation(tmp_path):
    with pytest.raises(ConfigError):
        config(tmp_path, budgets=(10, 5))
    with pytest.raises(ConfigError):
        config(tmp_path, budgets=(5, 5))
    with pytest.raises(ConfigError):
        config(tmp_path, pooling_systems=())
    with pytest.raises(ConfigError):
        config_from_mapping({"runs": "r", "qrels": "q", "depth": 5, "budget": "5", "colour": "red"})
    with pytest.raises(ConfigError):
        config_from_mapping({"runs": "r", "depth": 5, "budget": "5"})


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.yaml"
    path.write_text("runs: runs\nqrels: gold.qrels\ndepth: 20\nbudgets: [10, 20]\nmethods: [mtf, hedge]\n"
                    "measures: AP\npermutations: 500\nseed: 3\n")
    cfg = load_config(path, {"depth": 7, "budgets": None})
    assert cfg.pool_depth == 7
    assert cfg.budgets == (10, 20)
    assert [m.kind for m in cfg.methods] == [MethodKind.MTF, MethodKind.HEDGE]
    assert all(m.rng_seed == 3 for m in cfg.methods)
    assert cfg.runs_path == str(tmp_path / "runs")
    assert cfg.significance.permutations == 500


def test_full_budget_identity(small_result):
    _, result = small_result
    for c in result.cells:
        if c["budget"] != 400:
            continue
        m = c["mean"]
        assert m["tau"] == 1.0 and m["precision"] == 1.0 and m["recall"] == 1.0 and m["bias"] == 0.0
        assert m["aa"] == result.gold["MAP"]["n_sig"]
        assert m["ad"] == m["ma_g"] == m["ma_l"] == m["md_g"] == m["md_l"] == 0


def test_repetitions_only_for_stochastic(small_result):
    _, result = small_result
    reps = {c["method"]: c["repetitions"] for c in result.cells}
    assert reps["TS"] == reps["TS-NS"] == 2
    assert reps["top-k"] == reps["MTF"] == reps["Hedge"] == 1


def test_gold_shared_and_rels_monotone(small_result):
    _, result = small_result
    for method in ("top-k", "MTF", "MM", "Hedge", "NTCIR"):
        small = result.cell(method, 5, "MAP")["mean"]["nrels"]
        full = result.cell(method, 400, "MAP")["mean"]["nrels"]
        assert small <= full == result.pools["relevant"]


def test_report_consistency(small_result):
    _, result = small_result
    for c in result.cells:
        for rep in c["reps"]:
            assert rep["aa"] + rep["ad"] + rep["ma_g"] + rep["md_g"] == rep["n_gold_sig"]
            assert rep["n_gold_sig"] == result.gold["MAP"]["n_sig"]


def test_json_round_trip_and_report_render(small_result, tmp_path):
    _, result = small_result
    again = ExperimentResult.from_json(result.to_json())
    assert again.to_json() == result.to_json()
    a = render_reports(result, tmp_path / "a")
    b = render_reports(again, tmp_path / "b")
    assert [p.name for p in a] == [p.name for p in b]
    for pa, pb in zip(a, b):
        assert pa.read_bytes() == pb.read_bytes()
    md = (tmp_path / "a" / "correlation_map.md").read_text()
    assert md.splitlines()[0].startswith("| Method | MAP/5 (")
    assert len(md.splitlines()) == 2 + len(MethodKind)


def test_output_dir_written(small_result):
    cfg, result = small_result
    out = cfg.output_dir
    import pathlib
    files = sorted(p.name for p in pathlib.Path(out).iterdir())
    assert "results.json" in files and "agreement_map.md" in files
    assert "ma_map_hedge_b5.csv" in files
    assert json.loads((pathlib.Path(out) / "results.json").read_text())["pools"] == result.pools


def test_empty_and_single_method_tables(tmp_path):
    runs, gold = make_collection(n_runs=3, n_topics=3, seed=4)
    res = run_experiment(config(tmp_path, methods=(), budgets=(5,)), runs, gold, write=False)
    render_reports(res, tmp_path / "r")
    assert (tmp_path / "r" / "correlation_map.csv").read_text().count("\n") == 1
    assert (tmp_path / "r" / "correlation_map.md").read_text().count("\n") == 2
    res = run_experiment(config(tmp_path, methods=(MethodConfig("mtf"),), budgets=(5,)), runs, gold, write=False)
    lines = render_reports(res, tmp_path / "s")[0].read_text().splitlines()
    assert len(lines) == 2 and "" not in lines[1].split(",")


def test_refuses_foreign_directory(tmp_path, small_result):
    _, result = small_result
    foreign = tmp_path / "mine"
    foreign.mkdir()
    (foreign / "thesis.tex").write_text("keep me")
    with pytest.raises(ConfigError):
        write_output_dir(result, foreign)
    assert (foreign / "thesis.tex").exists()


def test_stage_error_leaves_no_output(tmp_path):
    runs, gold = make_collection(n_runs=3, n_topics=3)
    cfg = config(tmp_path, evaluated_systems=("run0", "ghost"))
    with pytest.raises(StageError) as info:
        run_experiment(cfg, runs, gold)
    assert info.value.stage == "load"
    assert not (tmp_path / "out").exists()


def test_non_pooled_evaluation(tmp_path):
    runs, gold = make_collection(n_runs=6, n_topics=4, seed=2)
    cfg = config(tmp_path, pooling_systems=("run0", "run2", "run4"), evaluated_systems=("run1", "run3", "run5"),
                 methods=(MethodConfig("ntcir"),), budgets=(10,))
    res = run_experiment(cfg, runs, gold, write=False)
    assert res.gold["MAP"]["systems"] == ["run1", "run3", "run5"]
    assert res.pools["pairs"] == 3

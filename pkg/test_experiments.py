"""Tests for experiment plans, metric rows and writers."""

import json

import numpy as np
import pytest

from geocast import experiments
from geocast.config import InsertionMode, KnowledgeMode, RunConfig, StrategyKind, derive_seed
from geocast.error_handling import ErrorAggregator, NonConvergenceError, ReportIOError, UsageError
from geocast.experiments import (
    CSV_HEADER,
    Cell,
    CellResult,
    MetricsRow,
    collect_results,
    degree_trend_checks,
    exp_fig1ab,
    exp_fig1de,
    format_value,
    plan_command,
    plan_experiment,
    report_path,
    run_serial,
    run_stability_cell,
    write_csv,
    write_report,
)


def _row(metric="messages_sent", value=3, run_id="r"):
    return MetricsRow("fig1ab", run_id, 1, 10, 2, 1, "empty-rect", metric, value)


def _cell(n=100, replica=0):
    return Cell("fig1c", n, 2, 1, replica, 7, StrategyKind.EMPTY_RECT, KnowledgeMode.FULL, InsertionMode.BATCH)


@pytest.mark.parametrize(
    "value, text",
    [(True, "1"), (False, "0"), (3, "3"), (np.int64(4), "4"), (0.5, "0.500000"), (np.float64(1 / 3), "0.333333")],
)
def test_format_value(value, text):
    assert format_value(value) == text


def test_metrics_row_vocabulary():
    with pytest.raises(UsageError):
        _row(metric="latency")
    assert _row().csv_fields()[-2:] == ["messages_sent", "3"]


def test_cell_name_is_stable():
    assert _cell().name == "fig1c-n100-d2-k1-empty-rect-full-batch-r00"


def test_derive_seed_is_deterministic():
    a = derive_seed(1, "fig1ab", n=10, d=2)
    assert a == derive_seed(1, "fig1ab", d=2, n=10)
    assert a != derive_seed(2, "fig1ab", n=10, d=2)
    assert a != derive_seed(1, "fig1ab", n=11, d=2)
    assert 0 <= a < 2 ** 63


def test_write_csv_empty_has_header_only(tmp_path):
    path = write_csv([], tmp_path / "out.csv")
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"


def test_write_csv_single_row(tmp_path):
    path = write_csv([_row()], tmp_path / "nested" / "out.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1] == "fig1ab,r,1,10,2,1,empty-rect,messages_sent,3"


def test_write_csv_sorts_rows(tmp_path):
    rows = [_row(run_id="b"), _row(metric="duplicates", value=0, run_id="a"), _row(run_id="a")]
    first = write_csv(rows, tmp_path / "one.csv").read_bytes()
    second = write_csv(list(reversed(rows)), tmp_path / "two.csv").read_bytes()
    assert first == second
    assert first.decode().splitlines()[1].split(",")[1] == "a"


def test_write_csv_reports_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ReportIOError):
        write_csv([], blocker / "out.csv")


def test_report_path():
    assert report_path("results/fig1ab.csv").name == "fig1ab.report.json"


def test_report_timings_only_when_requested(tmp_path):
    plan = plan_command("overlay", RunConfig(n=10))
    result = collect_results(plan, [], ErrorAggregator(), wall_time=1.25)
    assert "wall_time_seconds" not in result.report()

    plan = plan_command("overlay", RunConfig(n=10, include_timings=True))
    result = collect_results(plan, [], ErrorAggregator(), wall_time=1.25)
    data = json.loads(write_report(result, tmp_path / "r.json").read_text())
    assert data["wall_time_seconds"] == 1.25
    assert data["config"]["n"] == 10
    assert "jobs" not in data["config"]


def test_degree_trend_checks():
    good = []
    for n, avg in [(100, 6.6), (1000, 10.0)]:
        result = CellResult(_cell(n))
        result.emit("avg_topo_degree", avg)
        good.append(result)
    checks = degree_trend_checks(good)
    assert checks == {
        "fig1c-r00:log_ratio_within_2x": True,
        "fig1c-r00:sublinear": True,
        "fig1c-r00:monotone": True,
    }

    bad = []
    for n, avg in [(100, 9.0), (1000, 3.0)]:
        result = CellResult(_cell(n))
        result.emit("avg_topo_degree", avg)
        bad.append(result)
    assert degree_trend_checks(bad)["fig1c-r00:monotone"] is False


def test_plan_experiment_requires_id():
    with pytest.raises(UsageError):
        plan_experiment(RunConfig())


def test_reduced_fig1ab_plan():
    plan = plan_experiment(RunConfig(experiment="fig1ab", preset="reduced", seeds=2))
    assert {c.d for c in plan.cells} == {2, 3}
    assert {c.n for c in plan.cells} == {300}
    assert len(plan.cells) == 4
    assert len({c.seed for c in plan.cells}) == 4


def test_fig1c_forces_fast_mode_for_large_n():
    config = RunConfig(experiment="fig1c", sweep_n=[100, 2000], seeds=1,
                       knowledge_mode="gossip", insertion="incremental")
    modes = {c.n: (c.mode, c.insertion) for c in plan_experiment(config).cells}
    assert modes[100] == (KnowledgeMode.GOSSIP, InsertionMode.INCREMENTAL)
    assert modes[2000] == (KnowledgeMode.FULL, InsertionMode.BATCH)


def test_small_fig1c_run_emits_trend_checks():
    config = RunConfig(experiment="fig1c", sweep_n=[30, 60], seeds=1)
    result = run_serial(plan_experiment(config))
    assert not len(result.errors)
    assert "fig1c-r00:monotone" in result.checks
    assert {row.metric_name for row in result.rows} >= {"max_topo_degree", "avg_topo_degree"}


def test_small_fig1de_run():
    config = RunConfig(experiment="fig1de", n=60, sweep_d=[2, 3], sweep_k=[1, 2], seeds=1)
    plan = plan_experiment(config)
    assert {c.strategy for c in plan.cells} == {StrategyKind.ORTHO_HP}
    result = run_serial(plan)
    assert result.passed, result.failed_checks()
    singles = [row.value for row in result.rows if row.metric_name == "is_single_tree"]
    assert singles == [True] * 4


def test_fig1de_rejects_time_index_beyond_sweep():
    with pytest.raises(UsageError):
        plan_experiment(RunConfig(experiment="fig1de", d=3, time_coord_index=3, sweep_d=[2, 3]))


def test_churn_matches_full_equilibrium():
    config = RunConfig(experiment="churn", n=40, seeds=1)
    plan = plan_experiment(config)
    assert plan.cells[0].insertion is InsertionMode.INCREMENTAL
    result = run_serial(plan)
    assert result.passed, result.failed_checks()
    jaccard = [row.value for row in result.rows if row.metric_name == "jaccard_vs_full"]
    assert jaccard == [1.0]


def test_verify_plan_caps_size():
    with pytest.raises(UsageError):
        plan_command("verify", RunConfig(n=600))
    assert len(plan_command("verify", RunConfig(n=600, allow_large=True, seeds=1)).cells) == 1


def test_verify_run_passes():
    result = run_serial(plan_command("verify", RunConfig(n=40, seeds=2, root_sample=4)))
    assert result.passed, result.failed_checks()
    names = {row.metric_name for row in result.rows}
    assert {"knowledge_mismatches", "equilibrium_mismatches", "delivery_mismatches"} <= names


def test_multicast_plan_checks_root():
    with pytest.raises(UsageError):
        plan_command("multicast", RunConfig(n=5, root=5))
    plan = plan_command("multicast", RunConfig(n=5, root=4, seed=3))
    assert plan.cells[0].seed == 3


def test_unknown_command():
    with pytest.raises(UsageError):
        plan_command("teleport", RunConfig())


def test_exp_functions_return_sorted_rows():
    rows = exp_fig1ab(RunConfig(n=40, sweep_d=[2], seeds=1, root_sample=3))
    assert rows == sorted(rows, key=MetricsRow.sort_key)
    assert {row.d for row in rows} == {2}


def test_exp_functions_propagate_cell_errors():
    config = RunConfig(n=60, sweep_d=[2], sweep_k=[1], seeds=1, knowledge_mode="gossip", max_rounds=1)
    with pytest.raises(NonConvergenceError):
        exp_fig1de(config)


def test_stability_forest_reaches_the_report(monkeypatch):
    real = experiments.build_lifetime_overlay

    def isolate_shortest_lived(*args, **kwargs):
        topology, rounds = real(*args, **kwargs)
        loner = min(topology.peers.values(), key=lambda p: p.lifetime).id
        for pid, neighbours in topology.out_neighbors.items():
            topology.out_neighbors[pid] = () if pid == loner else tuple(q for q in neighbours if q != loner)
        return topology, rounds

    monkeypatch.setattr(experiments, "build_lifetime_overlay", isolate_shortest_lived)
    cell = Cell("fig1de", 40, 2, 1, 0, 7, StrategyKind.ORTHO_HP, KnowledgeMode.FULL, InsertionMode.BATCH)
    result = run_stability_cell(RunConfig(n=40), cell)
    assert not result.metric("is_single_tree")
    assert result.metric("root_candidates") == 2
    assert result.metric("largest_component") == 39
    assert [c["size"] for c in result.forest] == [39, 1]
    assert result.checks["single_tree"] is False

    report = collect_results(plan_command("overlay", RunConfig(n=40)), [result]).report()
    assert report["forests"] == {cell.name: result.forest}
    assert json.loads(json.dumps(report))["forests"][cell.name][1]["size"] == 1


def test_single_tree_report_has_no_forests():
    result = run_serial(plan_experiment(RunConfig(experiment="fig1de", n=40, sweep_d=[2], sweep_k=[1], seeds=1)))
    assert "forests" not in result.report()
    assert [row.value for row in result.rows if row.metric_name == "largest_component"] == [40]

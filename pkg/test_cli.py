"""End-to-end tests for the run_simulation command line."""

import csv
import json

import pytest

from run_simulation import main


def _rows(path):
    with open(path, newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def _error_record(captured):
    for line in captured.err.splitlines():
        if line.startswith("{"):
            return json.loads(line)
    raise AssertionError(f"no JSON error line in {captured.err!r}")


def test_multicast_single_peer(tmp_path):
    out = tmp_path / "multicast.csv"
    assert main(["multicast", "--n", "1", "--out", str(out), "--jobs", "1"]) == 0
    rows = {row["metric_name"]: row["value"] for row in _rows(out)}
    assert rows["messages_sent"] == "0"
    report = json.loads((tmp_path / "multicast.report.json").read_text())
    assert report["passed"] is True
    assert "wall_time_seconds" not in report


def test_verify_small_instance(tmp_path):
    out = tmp_path / "verify.csv"
    assert main(["verify", "--n", "30", "--seeds", "1", "--root-sample", "3", "--out", str(out)]) == 0
    rows = {row["metric_name"]: row["value"] for row in _rows(out)}
    assert rows["equilibrium_mismatches"] == "0"
    assert rows["knowledge_mismatches"] == "0"


def test_unknown_flag_is_usage_error(tmp_path, capsys):
    assert main(["overlay", "--no-such-flag", "--out", str(tmp_path / "x.csv")]) == 2
    assert not (tmp_path / "x.csv").exists()


def test_out_of_range_parameter(tmp_path, capsys):
    assert main(["overlay", "--br", "1", "--out", str(tmp_path / "x.csv")]) == 2
    record = _error_record(capsys.readouterr())
    assert record["category"] == "usage"
    assert record["details"]["errors"][0]["field"] == "br"


def test_verify_refuses_large_instance(tmp_path, capsys):
    assert main(["verify", "--n", "600", "--out", str(tmp_path / "v.csv")]) == 2
    assert _error_record(capsys.readouterr())["category"] == "usage"


def test_experiment_needs_id(tmp_path, capsys):
    assert main(["experiment", "--out", str(tmp_path / "e.csv")]) == 2


def test_identical_invocations_are_byte_identical(tmp_path):
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name / "overlay.csv"
        args = ["overlay", "--n", "80", "--d", "3", "--seed", "11", "--out", str(out)]
        assert main(args) == 0
        outputs.append((out.read_bytes(), (tmp_path / name / "overlay.report.json").read_bytes()))
    assert outputs[0] == outputs[1]


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"n": 5, "d": 3, "seed": 4, "knowledge-mode": "full"}))
    out = tmp_path / "overlay.csv"
    assert main(["overlay", "--config", str(config), "--n", "12", "--out", str(out)]) == 0
    rows = _rows(out)
    assert {row["N"] for row in rows} == {"12"}
    assert {row["D"] for row in rows} == {"3"}
    assert {row["seed"] for row in rows} == {"4"}


def test_unknown_config_key(tmp_path, capsys):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({"colour": "blue"}))
    assert main(["overlay", "--config", str(config), "--out", str(tmp_path / "x.csv")]) == 2
    assert _error_record(capsys.readouterr())["details"]["keys"] == ["colour"]


@pytest.mark.parametrize("command", ["overlay", "stability"])
def test_single_run_commands(tmp_path, command):
    out = tmp_path / f"{command}.csv"
    assert main([command, "--n", "50", "--out", str(out)]) == 0
    assert _rows(out)

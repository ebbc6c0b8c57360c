from __future__ import annotations

import csv
import json

import pytest
from typer.testing import CliRunner

from schoolsense.cli import LATENCY_HEADERS, app

runner = CliRunner()

FLEET_YAML = """\
sites: 1
sensors: 12
days: 2
reporting_periods: {environmental: 300, weather: 300, atmospheric: 300, power: 300}
loss_days:
  S01R01.temperature: [2017-10-03]
"""


def _last_json(output: str) -> dict:
    return json.loads([line for line in output.splitlines() if line.startswith("{")][-1])


@pytest.fixture(autouse=True)
def _env(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for name in ("SCHOOLSENSE_TOPOLOGY", "SCHOOLSENSE_STORE", "SCHOOLSENSE_API_KEYS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv("SCHOOLSENSE_FLUSH_EVERY", "100000")


def test_unknown_command_is_a_usage_error():
    result = runner.invoke(app, ["frobnicate"])
    assert result.exit_code == 2


def test_topology_is_required_for_site_analyses(tmp_path):
    args = ["analyze", "comfort", "--from", "2017-10-02", "--to", "2017-10-06"]
    result = runner.invoke(app, [*args, "--store", str(tmp_path)])
    assert result.exit_code == 1
    assert "topology required" in result.output


def test_report_suffix_is_checked(tmp_path):
    args = ["analyze", "outliers", "--resource", "R1.temperature", "--from", "0", "--to", "1"]
    result = runner.invoke(app, [*args, "--out", str(tmp_path / "report.txt")])
    assert result.exit_code == 1
    assert "InvalidConfig" in result.output


def test_replay_needs_exactly_one_target(tmp_path):
    args = ["replay", "--from", "0", "--to", "1", "--store", str(tmp_path)]
    both = runner.invoke(app, [*args, "--sink", "127.0.0.1:9", "--into", str(tmp_path / "b")])
    assert both.exit_code == 1
    assert runner.invoke(app, args).exit_code == 1


def test_bench_writes_latency_csv(tmp_path):
    out = tmp_path / "latency.csv"
    args = ["bench", "--rate", "200", "--duration", "0.5", "--resources-per-type", "2"]
    result = runner.invoke(app, [*args, "--out", str(out)])
    assert result.exit_code == 0, result.output
    with out.open(encoding="utf-8", newline="") as f:
        rows = list(csv.reader(f))
    assert tuple(rows[0]) == LATENCY_HEADERS
    assert sum(int(row[1]) for row in rows[1:]) == 100


def test_simulate_analyze_query_and_replay(tmp_path):
    config = tmp_path / "fleet.yaml"
    config.write_text(FLEET_YAML, encoding="utf-8")
    store = tmp_path / "store"
    result = runner.invoke(app, ["simulate", "--config", str(config), "--sink", str(store)])
    assert result.exit_code == 0, result.output
    truth = json.loads((store / "ground_truth.json").read_text(encoding="utf-8"))
    assert truth["loss_calendar"] == {"S01R01.temperature": ["2017-10-03"]}
    common = ["--store", str(store), "--topology", str(store / "topology.yaml")]

    report, matrix = tmp_path / "availability.json", tmp_path / "matrix.csv"
    days = ["--from", "2017-10-02", "--to", "2017-10-03"]
    result = runner.invoke(
        app,
        ["analyze", "availability", *days, "--matrix", str(matrix), "--out", str(report), *common],
    )
    assert result.exit_code == 0, result.output
    (site,) = json.loads(report.read_text(encoding="utf-8"))["sites"]
    assert site["Outages"] == pytest.approx(4.17)
    with matrix.open(encoding="utf-8", newline="") as f:
        missing = [row for row in csv.DictReader(f) if row["status"] == "missing"]
    assert [(r["resource_id"], r["date"]) for r in missing] == [
        ("S01R01.temperature", "2017-10-03")
    ]

    daily = tmp_path / "humidity.json"
    window = ["--from", "2017-10-01T00:00:00Z", "--to", "2017-10-05T00:00:00Z"]
    result = runner.invoke(
        app,
        ["query", "--resource", "S01R01.humidity", *window, "--out", str(daily), *common],
    )
    assert result.exit_code == 0, result.output
    rows = json.loads(daily.read_text(encoding="utf-8"))
    assert sum(row["count"] for row in rows) == 576

    fresh = tmp_path / "fresh"
    result = runner.invoke(app, ["replay", *window, "--into", str(fresh), *common])
    assert result.exit_code == 0, result.output
    assert _last_json(result.output)["count"] == truth["expected_messages"]
    first, second = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    for source, target in ((store, first), (fresh, second)):
        exported = runner.invoke(app, ["export", "--store", str(source), "--out", str(target)])
        assert exported.exit_code == 0, exported.output
    assert first.read_bytes() == second.read_bytes()

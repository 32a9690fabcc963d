import asyncio
import csv
import json
import os
from datetime import datetime, timedelta

import pytest

from main import EXIT_GATE_FAILURE, EXIT_OK, EXIT_USAGE, DailyRotatingHandler, run_cli
from service import harness
from service.gates import at_most, skipped
from utils.locales import Locale
from utils.run_ledger import RunLedger


@pytest.fixture
def write_config(isolate_env):
    def write(name="run.json", **changes):
        data = {
            "schema": 1,
            "experiment": "separation",
            "gamma": 2.0,
            "d": 1,
            "t_grid": [20, 50],
            "side": 11,
            "realizations": 3,
            "base_seed": 5,
            "output_dir": str(isolate_env / "out" / name.split(".")[0]),
        }
        data.update(changes)
        path = isolate_env / name
        path.write_text(json.dumps(data), encoding="utf-8")
        return str(path)
    return write


def _last_json(capsys):
    lines = [line for line in capsys.readouterr().out.splitlines() if line.strip()]
    return json.loads(lines[-1])


def _read_rows(path):
    with open(path, encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_list(capsys, isolate_env):
    assert run_cli(["list"]) == EXIT_OK
    names = _last_json(capsys)
    assert len(names) == 9
    assert "localisation" in names


def test_scales_from_flags(capsys, isolate_env):
    assert run_cli(["scales", "--gamma", "2", "--d", "1", "--t-grid", "100"]) == EXIT_OK
    payload = _last_json(capsys)
    assert payload["rho"] == 0
    assert payload["t"] == 100.0
    assert run_cli(["scales", "--gamma", "3", "--d", "2", "--t-grid", "100", "1000"]) == EXIT_OK
    assert [s["t"] for s in _last_json(capsys)] == [100.0, 1000.0]


def test_scales_from_config(capsys, write_config):
    assert run_cli(["scales", write_config()]) == EXIT_OK
    table = _last_json(capsys)
    assert [s["side"] for s in table] == [11, 11]


@pytest.mark.parametrize("argv", [
    ["scales", "--gamma", "2", "--t-grid", "100"],
    ["scales", "--gamma", "2", "--d", "1"],
    ["scales", "--gamma", "2", "--d", "1", "--t-grid", "3"],
    ["solve"],
    ["frobnicate"],
    ["solve", "x.json", "--method", "euler"],
])
def test_usage_errors(argv, isolate_env):
    assert run_cli(argv) == EXIT_USAGE


def test_invalid_config_exits_with_usage_code(write_config):
    assert run_cli(["sample", write_config(gamma=0)]) == EXIT_USAGE
    assert run_cli(["sample", write_config(side=10)]) == EXIT_USAGE


def test_sample_is_fixed_by_seed(capsys, write_config, tmp_path):
    path = write_config()
    assert run_cli(["sample", path, "--output-dir", str(tmp_path / "a")]) == EXIT_OK
    first = _last_json(capsys)
    assert run_cli(["sample", path, "--output-dir", str(tmp_path / "b")]) == EXIT_OK
    second = _last_json(capsys)
    assert first["sha256"] == second["sha256"]
    assert first["side"] == 11
    assert len(_read_rows(first["path"])) == 11
    assert run_cli(["sample", path, "--seed", "6", "--output-dir", str(tmp_path / "c")]) == EXIT_OK
    assert _last_json(capsys)["sha256"] != first["sha256"]


def test_seed_env_and_flag_precedence(capsys, write_config, monkeypatch, tmp_path):
    path = write_config()
    monkeypatch.setenv("PAM_SEED", "6")
    assert run_cli(["sample", path, "--output-dir", str(tmp_path / "env")]) == EXIT_OK
    assert _last_json(capsys)["seed"] == 6
    assert run_cli(["sample", path, "--seed", "9", "--output-dir", str(tmp_path / "flag")]) == EXIT_OK
    assert _last_json(capsys)["seed"] == 9


def test_unknown_method_in_config(write_config):
    assert run_cli(["solve", write_config(solve={"method": "euler"})]) == EXIT_USAGE


def test_solve_at_time_zero_is_indicator(capsys, write_config):
    path = write_config()
    assert run_cli(["solve", path, "--t", "0"]) == EXIT_OK
    report = _last_json(capsys)
    snapshot_path = next(p for p in report["outputs"] if p.endswith("snapshot.csv"))
    rows = _read_rows(snapshot_path)
    values = {int(r["coord_1"]): float(r["u"]) for r in rows}
    assert values[0] == pytest.approx(1.0, abs=1e-12)
    assert sum(abs(v) for k, v in values.items() if k != 0) <= 1e-12


def test_cross_check_on_zero_field(capsys, write_config, tmp_path):
    field_path = tmp_path / "zero.csv"
    lines = ["coord_1,xi"] + [f"{x},0" for x in range(-5, 6)]
    field_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    path = write_config(solve={"walkers": 40000, "seed": 3})
    assert run_cli(["solve", path, "--t", "1", "--field", str(field_path), "--cross-check"]) == EXIT_OK
    report = _last_json(capsys)["cross_check"]
    assert report["spectral_vs_ode"] <= 1e-7
    assert report["fk_vs_ode_sigma"] <= 5.0


def test_experiment_unknown_name(write_config):
    assert run_cli(["experiment", write_config(experiment="nope")]) == EXIT_USAGE


def test_experiment_gate_failure(capsys, write_config, isolate_env):
    path = write_config(gates={"min_frequency": 1.5})
    assert run_cli(["experiment", path, "--workers", "1"]) == EXIT_GATE_FAILURE
    summary = _last_json(capsys)
    assert summary["failures"] == ["separated_frequency[t=50]"]
    out = isolate_env / "out" / "run"
    with open(out / "summary.json", encoding="utf-8") as f:
        assert json.load(f)["passed"] is False
    with open(out / "manifest.json", encoding="utf-8") as f:
        manifest = json.load(f)
    assert manifest["exit_code"] == EXIT_GATE_FAILURE
    assert str(out / "separation.csv") in manifest["outputs"]

    saved = asyncio.run(RunLedger().get(summary["run_id"]))
    assert saved is not None and saved.exit_code == EXIT_GATE_FAILURE


def test_experiment_passes(capsys, write_config):
    path = write_config(gates={"min_frequency": 0.0})
    assert run_cli(["experiment", path, "--realizations", "2"]) == EXIT_OK
    assert _last_json(capsys)["passed"] is True


def test_gate_lines_follow_locale(monkeypatch):
    monkeypatch.setattr(harness, "locale", Locale("en_US.UTF-8"))
    assert "failed" in harness.gate_line(at_most("kolmogorov", 0.3, 0.1))
    assert "passed" in harness.gate_line(at_most("kolmogorov", 0.05, 0.1))
    monkeypatch.setattr(harness, "locale", Locale("ja"))
    line = harness.gate_line(skipped("kolmogorov", "ρ=0"))
    assert "スキップ" in line and "ρ=0" in line


def test_locale_falls_back_to_chinese():
    locale = Locale("fr")
    assert locale.gate("skipped") == "跳过"
    assert locale.common("run_finished") == "✅ 实验完成"
    assert locale.gate("missing-key") == "missing-key"


def test_daily_log_file_and_cleanup(tmp_path):
    log_dir = tmp_path / "logs"
    log_dir.mkdir()
    stale = log_dir / f"{(datetime.now() - timedelta(days=30)).strftime('%Y-%m-%d')}.log"
    stale.write_text("old", encoding="utf-8")
    keep = log_dir / "notes.log"
    keep.write_text("", encoding="utf-8")
    handler = DailyRotatingHandler(str(log_dir), keep_days=7)
    try:
        assert os.path.basename(handler.baseFilename) == f"{datetime.now().strftime('%Y-%m-%d')}.log"
        assert not stale.exists()
        assert keep.exists()
    finally:
        handler.close()

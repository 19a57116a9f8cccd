"""Tests for the command-line interface."""

import csv
import json

import pytest

from evsync import __version__, cli

SMALL = ["--trials", "2", "--horizon", "10", "--workers", "1"]


def _read_csv(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_no_arguments_prints_help(capsys):
    assert cli.main([]) == cli.EXIT_OK
    assert "usage" in capsys.readouterr().out


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["--version"])
    assert info.value.code == 0
    assert __version__ in capsys.readouterr().out


def test_list(capsys):
    assert cli.main(["list"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    names = ("four_sensor_ring", "paper_sec5", "sync_demo", "estimation", "sync-only", "ar1_correlated")
    for name in names:
        assert name in out


def test_design_prints_certificate(capsys, tmp_path):
    code = cli.main(["design", "--preset", "four_sensor_ring", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "Feasibility: Mahler 1.1 < threshold 3" in out
    assert "Gamma:" in out
    # design writes nothing
    assert list(tmp_path.iterdir()) == []


def test_design_accepts_preset_alias(capsys):
    assert cli.main(["design", "--preset", "paper_sec5"]) == cli.EXIT_OK
    assert "Gamma:" in capsys.readouterr().out


def test_run_writes_artifacts(capsys, tmp_path):
    code = cli.main(["run", "--preset", "four_sensor_ring", *SMALL, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "[event] comm rate" in out
    assert "Performance loss" in out

    names = {p.name for p in tmp_path.iterdir()}
    assert names == {"summary.json", "trace.csv", "mean_mse.csv", "events.csv"}

    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["experiment"] == "estimation"
    assert summary["config"]["experiment"]["trials"] == 2
    assert set(summary["results"]["modes"]) == {"event", "full"}
    assert summary["results"]["modes"]["event"]["trigger_violations"] == 0

    trace = _read_csv(tmp_path / "trace.csv")
    assert trace[0] == ["k", "trial", "sensor", "mse", "triggered", "avg_identity_residual"]
    assert len(trace) == 1 + 2 * 11 * 4
    mean_mse = _read_csv(tmp_path / "mean_mse.csv")
    assert len(mean_mse) == 1 + 11 * 4
    events = _read_csv(tmp_path / "events.csv")
    assert events[0] == ["k", "trial", "agent", "triggered", "eps_sq", "threshold"]


def test_run_single_mode(tmp_path):
    code = cli.main(
        ["run", "--preset", "four_sensor_ring", *SMALL, "--mode", "event",
         "--out", str(tmp_path)]
    )
    assert code == cli.EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert set(summary["results"]["modes"]) == {"event"}
    assert "perf_loss" not in summary["results"]


def test_run_sync_only(capsys, tmp_path):
    code = cli.main(["run", "--preset", "sync_demo", *SMALL, "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    assert "[gaussian_iid]" in capsys.readouterr().out
    rows = _read_csv(tmp_path / "disagreement.csv")
    assert rows[0] == ["noise", "transmission", "k", "mean_disagreement"]
    assert len(rows) == 1 + 4 * 2 * 11


def test_config_errors_exit_with_2(capsys, tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG
    infeasible = {
        "plant": {"A": [[5.0, 0.0], [0.0, 1.0]], "Q": [[1.0, 0.0], [0.0, 1.0]]},
        "sensors": {
            "C": [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]],
            "R": [[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, 1.0, 0], [0, 0, 0, 1.0]],
        },
        "graph": {"kind": "ring"},
    }
    path = tmp_path / "infeasible.json"
    path.write_text(json.dumps(infeasible))
    assert cli.main(["design", "--config", str(path)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert err.count("synchronization is infeasible") == 1


def test_bad_override_exits_with_2():
    args = ["run", "--preset", "four_sensor_ring", "--trials", "0"]
    assert cli.main(args) == cli.EXIT_CONFIG


def test_sweep(capsys, tmp_path):
    code = cli.main(
        ["sweep", "--preset", "four_sensor_ring", *SMALL, "--out", str(tmp_path),
         "--c0", "0.5", "4"]
    )
    assert code == cli.EXIT_OK
    out = capsys.readouterr().out.splitlines()
    assert out[0].split() == ["c0", "c1", "rho", "rate", "loss"]
    assert len(out) == 3
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert [row["c0"] for row in doc["sweep"]] == [0.5, 4.0]
    assert len(_read_csv(tmp_path / "sweep.csv")) == 3


def test_sweep_rejects_bad_grid_and_sync_only():
    args = ["sweep", "--preset", "four_sensor_ring", *SMALL]
    assert cli.main(args + ["--c0", "-1"]) == cli.EXIT_CONFIG
    sync_args = ["sweep", "--preset", "sync_demo", *SMALL, "--c0", "0.1"]
    assert cli.main(sync_args) == cli.EXIT_CONFIG

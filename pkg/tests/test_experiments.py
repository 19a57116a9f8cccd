"""Tests for the estimation and sync-only experiments."""

import numpy as np
import pytest

from evsync.config import RunConfig, load_preset
from evsync.experiments import EXPERIMENT_REGISTRY, experiment_for
from evsync.experiments.estimation import EstimationExperiment
from evsync.experiments.sync_only import SyncOnlyExperiment, agents_bounded, run_sync_trial
from evsync.plantsim import NoiseSpec
from evsync.syncctl import TriggerParams


@pytest.fixture(scope="module")
def estimation_config():
    return load_preset("four_sensor_ring").with_overrides(trials=3, horizon=20, workers=1)


@pytest.fixture(scope="module")
def sync_config():
    return load_preset("sync_demo").with_overrides(trials=2, horizon=30, workers=1)


def test_registry():
    assert set(EXPERIMENT_REGISTRY) == {"estimation", "sync-only"}
    assert isinstance(experiment_for(load_preset("four_sensor_ring")), EstimationExperiment)
    assert isinstance(experiment_for(load_preset("sync_demo")), SyncOnlyExperiment)


def test_estimation_design_only(estimation_config):
    result = EstimationExperiment(estimation_config).run(design_only=True)
    assert result.success
    assert result.summary == {}
    design = result.design
    assert design["certificate"]["feasible"]
    assert design["kalman"]["gain_from"] == "posterior"
    assert len(design["sync"]["Gamma"]) == 2
    assert np.allclose(design["sync"]["Gamma"], [0.80, -0.41], atol=0.05)
    assert design["decomposition"]["beta_residual"] < 1e-8
    assert all(r["radius"] < 1.0 for r in design["sync"]["closed_loop_radii"])


def test_estimation_run(estimation_config):
    experiment = EstimationExperiment(estimation_config)
    result = experiment.run()
    assert result.success, result.error
    summary = result.summary
    assert set(summary["modes"]) == {"event", "full"}
    assert summary["modes"]["full"]["comm_rate"]["mean"] == 1.0
    assert summary["modes"]["event"]["comm_rate"]["mean"] < 1.0
    assert set(summary["stability"]) == {"event", "full"}
    assert len(summary["stability"]["event"]["bounded"]) == 4
    assert experiment.monte_carlo.modes["event"].trials == 3
    assert any(line.startswith("Performance loss") for line in result.report)


def test_estimation_is_independent_of_workers(estimation_config):
    serial = EstimationExperiment(estimation_config).run()
    parallel = EstimationExperiment(estimation_config.with_overrides(workers=2)).run()
    assert serial.summary == parallel.summary
    assert (
        EstimationExperiment(estimation_config).summary_document(serial)
        == EstimationExperiment(estimation_config).summary_document(parallel)
    )


def test_estimation_rejects_sync_only_config(sync_config):
    result = EstimationExperiment(sync_config).run()
    assert not result.success
    assert "mode event, full or both" in result.error


def test_estimation_sweep(estimation_config, tmp_path):
    experiment = EstimationExperiment(estimation_config)
    grid = [TriggerParams(0.5, 5.0, 0.9), TriggerParams(8.0, 5.0, 0.9)]
    table = experiment.sweep(grid, out_dir=str(tmp_path))
    assert [row["c0"] for row in table] == [0.5, 8.0]
    assert all(0.0 <= row["comm_rate"] <= 1.0 for row in table)
    assert (tmp_path / "sweep.json").exists()
    assert (tmp_path / "sweep.csv").exists()


def test_sync_only_run(sync_config):
    experiment = SyncOnlyExperiment(sync_config)
    result = experiment.run()
    assert result.success, result.error
    assert set(result.summary) == {
        "gaussian_iid",
        "state_dependent",
        "ar1_correlated",
        "cross_correlated",
    }
    for per_mode in result.summary.values():
        assert per_mode["full"]["comm_rate"]["mean"] == 1.0
        assert 0.0 < per_mode["event"]["comm_rate"]["mean"] <= 1.0
        assert per_mode["event"]["trigger_violations"] == 0
        assert per_mode["event"]["max_consistency_residual"] < 1e-9
    curve = experiment.curves["gaussian_iid"]["event"]
    assert curve.shape == (31,)


def test_sync_only_is_independent_of_workers(sync_config):
    serial = SyncOnlyExperiment(sync_config).run()
    parallel = SyncOnlyExperiment(sync_config.with_overrides(workers=2)).run()
    assert serial.summary == parallel.summary


def test_scalar_agents_on_complete_graph_synchronize_in_one_step():
    config = RunConfig.from_dict(
        {
            "mode": "sync-only",
            "graph": {"kind": "complete", "nodes": 3},
            "sync": {"S": 1.1},
            "noise": [{"kind": "gaussian_iid", "variance": 0.0}],
            "experiment": {"trials": 1, "horizon": 20, "workers": 1},
        }
    )
    setup = SyncOnlyExperiment(config).design()
    # mu2 = mum = 3, so Γ = 2S/(mu2 + mum) places every disagreement mode at 0
    assert setup.design.Gamma[0, 0] == pytest.approx(1.1 / 3.0)
    trial = run_sync_trial(setup, config.noise[0], TriggerParams(), 20, seed=0, force_all=True)
    assert trial["disagreement"][0] > 0
    assert trial["disagreement"][-1] < 1e-12 * trial["disagreement"][0]
    assert trial["comm_rate"] == 1.0


def test_sync_trial_is_reproducible(sync_config):
    setup = SyncOnlyExperiment(sync_config).design()
    a = run_sync_trial(setup, NoiseSpec("gaussian_iid"), TriggerParams(), 5, seed=4)
    b = run_sync_trial(setup, NoiseSpec("gaussian_iid"), TriggerParams(), 5, seed=4)
    assert np.array_equal(a["disagreement"], b["disagreement"])
    assert np.array_equal(a["network"].eta, b["network"].eta)


def test_agents_bounded():
    flat = np.ones((21, 2))
    growing = np.column_stack([np.ones(21), 1.1 ** np.arange(21)])
    assert agents_bounded(flat) == [True, True]
    assert agents_bounded(growing) == [True, False]


def test_event_triggered_disagreement_stays_bounded_per_agent():
    config = RunConfig.from_dict(
        {
            "mode": "sync-only",
            "graph": {"kind": "ring", "nodes": 5},
            "sync": {"S": 1.1},
            "noise": [{"kind": "gaussian_iid", "variance": 0.1}],
            "trigger": {"c0": 0.05, "c1": 1.0, "rho": 0.5},
            "experiment": {"trials": 2000, "horizon": 40, "workers": 1},
        }
    )
    setup = SyncOnlyExperiment(config).design()
    params = config.trigger_params()
    trials = [
        run_sync_trial(setup, config.noise[0], params, 40, seed=seed)
        for seed in range(2000)
    ]
    per_agent = np.mean([t["agent_disagreement"] for t in trials], axis=0)
    assert per_agent.shape == (41, 5)
    assert all(agents_bounded(per_agent))
    assert all(t["trigger_violations"] == 0 for t in trials)

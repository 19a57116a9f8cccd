"""Tests for the event-based distributed estimator."""

import math

import numpy as np
import pytest

from evsync import destimator
from evsync.core import netgraph
from evsync.core.errors import DimensionMismatch
from evsync.plantsim import PlantModel, SensorSuite, Trajectory, simulate_plant
from evsync.syncctl import TriggerParams

PARAMS = TriggerParams(c0=2.0, c1=5.0, rho=0.9)


@pytest.fixture(scope="module")
def model():
    return PlantModel(A=np.diag([0.9, 1.1]), Q=0.5 * np.eye(2), x0_cov=np.eye(2))


@pytest.fixture(scope="module")
def sensors():
    C = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]
    return SensorSuite(C=C, R=2.0 * np.eye(4))


@pytest.fixture(scope="module")
def setup(model, sensors):
    return destimator.build_setup(
        model, sensors, netgraph.ring(4), gain_from="posterior", zeta=0.5
    )


def test_setup_shapes(setup):
    assert setup.m == 4
    assert setup.n == 2
    assert setup.L.shape == (4, 8)
    assert setup.M.shape == (8, 2)
    assert setup.F.shape == (2, 8)
    assert setup.G.shape == (4, 2, 2)
    assert setup.lifted.S.shape == (8, 8)
    # m F M = I, so x̆_i = m F η_i tracks x when η_i tracks M x
    assert np.allclose(setup.m * setup.F @ setup.M, np.eye(2), atol=1e-8)


def test_sync_design_on_decomposition(setup):
    sync = setup.sync
    spec = setup.spectrum
    assert sync.certificate.mahler == pytest.approx(1.1)
    assert sync.certificate.threshold == pytest.approx(3.0)
    assert sync.margin > 0
    # every Γ from this formula lies on (mu2 + mum)/2 · Γ S⁻¹ B = 1
    half_sum = (spec.mu2 + spec.mu_max) / 2.0
    line = half_sum * sync.Gamma @ np.linalg.solve(sync.S, sync.B)
    assert line.item() == pytest.approx(1.0)
    gamma = sync.Gamma.ravel()
    assert gamma[0] > 0 > gamma[1]
    assert np.allclose(gamma, [0.69, -0.25], atol=0.1)


def test_chosen_input_direction_gives_design_gamma(model, sensors):
    setup = destimator.build_setup(
        model, sensors, netgraph.ring(4), gain_from="posterior", zeta=0.5,
        B=[[0.4728], [-0.352]],
    )
    sync = setup.sync
    assert np.allclose(sync.Gamma.ravel(), [0.80, -0.41], atol=0.05)
    assert sync.margin > 0
    spec = setup.spectrum
    half_sum = (spec.mu2 + spec.mu_max) / 2.0
    line = half_sum * sync.Gamma @ np.linalg.solve(sync.S, sync.B)
    assert line.item() == pytest.approx(1.0)


def test_build_setup_rejects_graph_size(model, sensors):
    with pytest.raises(DimensionMismatch):
        destimator.build_setup(model, sensors, netgraph.ring(3))


def test_identities_hold_under_triggering(setup):
    metrics, state = destimator.run_trial(setup, PARAMS, horizon=80, seed=1, mode="event")
    summary = metrics.summary()
    assert summary["avg_identity"] < 1e-9
    assert summary["fusion_identity"] < 1e-9
    assert summary["decomposition_identity"] < 1e-9
    assert summary["consistency"] < 1e-9
    assert metrics.trigger_violations == 0
    assert 0.0 < metrics.comm_rate < 1.0
    assert state.k == 80


def test_full_mode_broadcasts_every_step(setup):
    metrics, _ = destimator.run_trial(setup, PARAMS, horizon=30, seed=2, mode="full")
    assert metrics.comm_rate == 1.0
    assert metrics.summary()["avg_identity"] < 1e-9


def test_error_and_absolute_coordinates_agree(setup, model, sensors):
    traj = simulate_plant(model, sensors, horizon=40, seed=5)
    relative, _ = destimator.run_trial(
        setup, PARAMS, 40, None, traj=traj, coordinates="error"
    )
    absolute, _ = destimator.run_trial(
        setup, PARAMS, 40, None, traj=traj, coordinates="absolute"
    )
    assert np.array_equal(relative.broadcasts, absolute.broadcasts)
    assert np.allclose(relative.sq_err, absolute.sq_err, rtol=1e-6, atol=1e-9)
    assert np.allclose(relative.central_sq_err, absolute.central_sq_err, rtol=1e-6, atol=1e-9)


def test_zero_noise_stays_at_zero(setup):
    traj = Trajectory.zeros(2, 4, 20)
    for coordinates in destimator.COORDINATES:
        metrics, _ = destimator.run_trial(
            setup, PARAMS, 20, None, traj=traj, coordinates=coordinates
        )
        assert not np.any(metrics.sq_err)
        assert metrics.comm_rate == 0.0


def test_single_sensor_matches_centralized_filter():
    model = PlantModel(A=np.diag([0.9, 1.1]), Q=0.5 * np.eye(2), x0_cov=np.eye(2))
    sensors = SensorSuite(C=[[1.0, 1.0]], R=[[1.0]])
    setup = destimator.build_setup(model, sensors, netgraph.ring(1), allow_complex=True)
    assert not np.any(setup.sync.Gamma)
    metrics, _ = destimator.run_trial(setup, TriggerParams(), horizon=40, seed=3)
    assert np.allclose(metrics.sq_err[:, 0], metrics.central_sq_err, atol=1e-9)


def test_local_estimates_and_nodes(setup, model, sensors):
    traj = simulate_plant(model, sensors, horizon=5, seed=0)
    state = destimator.EstimatorState.initial(setup)
    for k in range(5):
        destimator.step(state, setup, traj.measurements[k + 1], PARAMS)
    estimates = destimator.local_estimates(state, setup)
    views = destimator.nodes(state, setup)
    assert len(views) == 4
    for i, node in enumerate(views):
        assert node.index == i
        assert np.allclose(node.x_breve, estimates[i])
        assert np.allclose(node.eta, state.network.eta[i])
    assert np.allclose(estimates.mean(axis=0), state.central, atol=1e-9)


def test_step_rejects_wrong_measurement_count(setup):
    state = destimator.EstimatorState.initial(setup)
    with pytest.raises(DimensionMismatch):
        destimator.step(state, setup, np.zeros(3), PARAMS)


def test_run_trial_rejects_bad_arguments(setup):
    with pytest.raises(ValueError):
        destimator.run_trial(setup, PARAMS, 10, 0, mode="lossy")
    with pytest.raises(ValueError):
        destimator.run_trial(setup, PARAMS, 10, 0, coordinates="polar")


def test_performance_loss_on_shared_realization(setup, model, sensors):
    traj = simulate_plant(model, sensors, horizon=60, seed=8)
    event, _ = destimator.run_trial(setup, PARAMS, 60, None, mode="event", traj=traj)
    full, _ = destimator.run_trial(setup, PARAMS, 60, None, mode="full", traj=traj)
    loss = destimator.performance_loss(event, full)
    expected = (event.steady_mse.mean() - full.steady_mse.mean()) / full.steady_mse.mean()
    assert loss == pytest.approx(expected)
    assert np.isfinite(destimator.performance_loss(event, full, steady=False))


def test_run_metrics_windows(setup):
    metrics, _ = destimator.run_trial(setup, PARAMS, horizon=10, seed=0)
    assert metrics.horizon == 10
    assert metrics.steady_window == slice(6, 11)
    assert metrics.broadcasts.shape == (11, 4)
    assert metrics.broadcasts[0].all()
    assert np.allclose(metrics.steady_mse, metrics.sq_err[6:].mean(axis=0))


def test_monte_carlo_single_trial(setup):
    result = destimator.monte_carlo(setup, trials=1, horizon=20, seed=0, params=PARAMS)
    assert set(result.modes) == {"event", "full"}
    event = result.modes["event"]
    assert event.trials == 1
    assert all(hw == 0.0 for _, hw in event.steady_mse)
    assert result.loss is not None
    doc = result.to_dict()
    assert set(doc["perf_loss"]) == {"steady", "whole"}
    assert doc["modes"]["full"]["comm_rate"]["mean"] == 1.0


def test_monte_carlo_single_mode_has_no_loss(setup):
    result = destimator.monte_carlo(
        setup, trials=2, horizon=10, seed=0, params=PARAMS, modes=("event",)
    )
    assert set(result.modes) == {"event"}
    assert result.loss is None
    with pytest.raises(ValueError):
        destimator.monte_carlo(setup, trials=0, horizon=10, seed=0, params=PARAMS)
    with pytest.raises(ValueError):
        destimator.monte_carlo(setup, trials=1, horizon=10, seed=0, params=PARAMS, modes=())


def test_monte_carlo_is_independent_of_workers(setup):
    serial = destimator.monte_carlo(setup, trials=4, horizon=20, seed=9, params=PARAMS)
    parallel = destimator.monte_carlo(
        setup, trials=4, horizon=20, seed=9, params=PARAMS, workers=2
    )
    assert serial.to_dict() == parallel.to_dict()
    for mode in serial.modes:
        assert np.array_equal(serial.modes[mode].mean_mse, parallel.modes[mode].mean_mse)


def test_trace_and_event_rows(setup):
    result = destimator.monte_carlo(
        setup, trials=3, horizon=5, seed=1, params=PARAMS, trace_trials=2
    )
    assert len(result.traces) == 2
    rows = list(destimator.trace_rows(result.traces, "event"))
    assert len(rows) == 2 * 6 * 4
    assert rows[0][:3] == (0, 0, 0)
    events = list(destimator.event_rows(result.traces, "event"))
    assert len(events) == 2 * 6 * 4
    # k = 0 is the mandatory initial broadcast and has no threshold
    assert events[0][3] == 1 and events[0][5] == ""


def test_sweep(setup):
    grid = [TriggerParams(0.5, 1.0, 0.9), TriggerParams(5.0, 1.0, 0.9)]
    rows = destimator.sweep(setup, grid, trials=2, horizon=20, seed=3)
    assert [row.params for row in rows] == grid
    table = [row.to_dict() for row in rows]
    assert table[0]["c0"] == 0.5
    assert 0.0 <= table[1]["comm_rate"] <= 1.0
    assert "perf_loss_whole" in table[0]


def test_monte_carlo_half_width_shrinks_with_trials(setup):
    small = destimator.monte_carlo(setup, trials=60, horizon=30, seed=5, params=PARAMS)
    large = destimator.monte_carlo(setup, trials=120, horizon=30, seed=5, params=PARAMS)
    for mode in ("event", "full"):
        ratio = large.modes[mode].network_steady_mse[1] / small.modes[mode].network_steady_mse[1]
        assert ratio == pytest.approx(1 / math.sqrt(2), rel=0.3)


def test_orthogonality_under_optimal_gain(model, sensors):
    optimal = destimator.build_setup(model, sensors, netgraph.ring(4), gain_from="prior")
    result = destimator.monte_carlo(
        optimal, trials=200, horizon=40, seed=17, params=PARAMS, modes=("full",)
    )
    for mean, half_width in result.modes["full"].cross_term:
        standard_error = half_width / 1.96
        assert abs(mean) <= 4 * standard_error

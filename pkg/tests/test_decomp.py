"""Tests for the local decomposition of the steady-state Kalman filter."""

import numpy as np
import pytest

from evsync import decomp, kalman
from evsync.core.errors import (
    ComplexSpectrumDisallowed,
    DimensionMismatch,
    ImaginaryResidue,
    NotObservable,
    PerturbationExhausted,
)
from evsync.plantsim import PlantModel, SensorSuite, simulate_plant


@pytest.fixture
def model():
    return PlantModel(A=np.diag([0.9, 1.1]), Q=0.5 * np.eye(2), x0_cov=np.eye(2))


@pytest.fixture
def sensors():
    C = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, -1.0]]
    return SensorSuite(C=C, R=2.0 * np.eye(4))


@pytest.fixture
def dec(model, sensors):
    return decomp.build(kalman.design(model, sensors, gain_from="posterior"))


def _rotation_design():
    """A design whose closed loop A − KCA has a complex pair."""
    model = PlantModel(A=[[0.9, -0.4], [0.4, 0.9]], Q=np.eye(2), x0_cov=np.eye(2))
    sensors = SensorSuite(C=[[1.0, 0.0]], R=[[1.0]])
    return kalman.design(model, sensors).with_gain(np.array([[0.3], [0.1]]))


def _run_local_filters(dec, traj):
    xi = np.zeros((dec.m, dec.n), dtype=complex if dec.is_complex else float)
    fused = [decomp.fuse(dec, xi)]
    for k in range(traj.horizon):
        xi, _ = decomp.local_filter_step_all(dec, xi, traj.measurements[k + 1])
        fused.append(decomp.fuse(dec, xi))
    return np.array(fused)


def test_identities(dec):
    assert dec.m == 4
    assert dec.n == 2
    assert not dec.is_complex
    assert dec.retries == 0
    assert dec.beta_residual() < 1e-8
    assert dec.sylvester_residual() < 1e-8
    assert dec.reconstruction_error() < 1e-8
    # S = Λ + 1βᵀ is similar to A
    assert dec.spectrum_mismatch() < 1e-6


def test_fusion_identities(dec):
    total = sum(F_i @ G_i for F_i, G_i in zip(dec.F, dec.G))
    assert np.allclose(total, np.eye(2), atol=1e-8)
    # F_i 1 recovers column i of the gain
    for i, F_i in enumerate(dec.F):
        assert np.allclose(F_i @ np.ones(2), dec.K_used[:, i])


def test_local_filters_reproduce_centralized_filter(model, sensors, dec):
    traj = simulate_plant(model, sensors, horizon=60, seed=4)
    fused = _run_local_filters(dec, traj)
    central = kalman.run_centralized(dec.kalman, traj)
    assert np.allclose(fused, central, atol=1e-8 * (1.0 + np.abs(central).max()))


def test_local_filter_step_matches_vectorized(model, sensors, dec):
    traj = simulate_plant(model, sensors, horizon=5, seed=1)
    xi = np.zeros((4, 2))
    states = [decomp.LocalFilterState.zero(dec) for _ in range(4)]
    for k in range(5):
        y = traj.measurements[k + 1]
        xi, z = decomp.local_filter_step_all(dec, xi, y)
        states = [decomp.local_filter_step(dec, i, s, y[i]) for i, s in enumerate(states)]
        for i, s in enumerate(states):
            assert np.allclose(s.xi_hat, xi[i])
            assert s.z_last == pytest.approx(z[i])


def test_local_filter_step_bad_index(dec):
    with pytest.raises(DimensionMismatch):
        decomp.local_filter_step(dec, 4, decomp.LocalFilterState.zero(dec), 0.0)


def test_complex_spectrum_needs_opt_in():
    with pytest.raises(ComplexSpectrumDisallowed):
        decomp.build(_rotation_design())


def test_complex_decomposition():
    kd = _rotation_design()
    dec = decomp.build(kd, allow_complex=True)
    assert dec.is_complex
    assert dec.beta_residual() < 1e-8
    assert dec.sylvester_residual() < 1e-8
    assert not np.iscomplexobj(dec.S_r)
    assert np.allclose(dec.T @ dec.S, dec.S_r @ dec.T)
    assert np.allclose(dec.ones_r, dec.T @ np.ones(2))

    traj = simulate_plant(kd.model, kd.sensors, horizon=40, seed=2)
    fused = _run_local_filters(dec, traj)
    assert not np.iscomplexobj(fused)
    assert np.allclose(fused, kalman.run_centralized(dec.kalman, traj), atol=1e-8)


def test_real_modal_fusion_matches_complex():
    dec = decomp.build(_rotation_design(), allow_complex=True)
    xi = np.array([[0.3 - 0.2j, 0.3 + 0.2j]])
    real_xi = np.real_if_close(xi @ dec.T.T)
    fused = decomp.fusion_matrix_real(dec) @ real_xi.ravel()
    assert np.allclose(fused, decomp.fuse(dec, xi))


def test_zero_gain_is_perturbed():
    model = PlantModel(A=np.diag([0.5, 0.3]), Q=np.eye(2), x0_cov=np.eye(2))
    sensors = SensorSuite(C=[[1.0, 1.0]], R=[[1.0]])
    kd = kalman.design(model, sensors).with_gain(np.zeros((2, 1)))
    dec = decomp.build(kd, seed=3)
    assert dec.retries >= 1
    assert 0 < np.abs(dec.K_used).max() <= decomp.PERTURB_SCALE
    assert dec.beta_residual() < 1e-6

    with pytest.raises(PerturbationExhausted):
        decomp.build(kd, max_retries=0)


def test_build_rejects_unobservable_sensors(model, sensors):
    kd = kalman.design(model, sensors)
    blind = SensorSuite(C=[[1.0, 0.0]] * 4, R=np.eye(4))
    with pytest.raises(NotObservable):
        decomp.build(kd, sensors=blind)
    with pytest.raises(DimensionMismatch):
        decomp.build(kd, sensors=SensorSuite(C=np.eye(2), R=np.eye(2)))


def test_real_part():
    assert np.array_equal(decomp.real_part(np.array([1.0 + 0.0j])), np.array([1.0]))
    with pytest.raises(ImaginaryResidue):
        decomp.real_part(np.array([1.0 + 1e-3j]))

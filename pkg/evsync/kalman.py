"""
Centralized steady-state Kalman filter.

This is both the optimality baseline of the distributed estimator and the
source of the gain K that the local decomposition splits across sensors.
"""

import logging
from dataclasses import dataclass

import numpy as np

from evsync.core.errors import DesignError, DimensionMismatch
from evsync.core.matops import (
    kalman_gain,
    posterior_covariance,
    solve_dare_fixed_point,
    solve_lyapunov,
    spectral_radius,
)
from evsync.plantsim import PlantModel, SensorSuite, Trajectory

logger = logging.getLogger("evsync.kalman")

GAIN_CONVENTIONS = ("prior", "posterior")


@dataclass(frozen=True, eq=False)
class KalmanDesign:
    """
    Steady-state filter x̂(k+1) = (A − KCA) x̂(k) + K y(k+1).

    Attributes:
        P: steady-state one-step prediction covariance (DARE fixed point)
        P_post: corresponding filtered covariance
        K: gain in use
        A_cl: closed-loop matrix A − KCA
        error_cov: exact steady-state error covariance of the recursion with K
        gain_from: which covariance K was computed from
    """

    model: PlantModel
    sensors: SensorSuite
    P: np.ndarray
    P_post: np.ndarray
    K: np.ndarray
    A_cl: np.ndarray
    error_cov: np.ndarray
    gain_from: str = "prior"

    def with_gain(self, K: np.ndarray) -> "KalmanDesign":
        """Same design with a replacement gain; A_cl and error_cov are recomputed."""
        A_cl, error_cov = _closed_loop(self.model, self.sensors, K)
        return KalmanDesign(
            model=self.model,
            sensors=self.sensors,
            P=self.P,
            P_post=self.P_post,
            K=K,
            A_cl=A_cl,
            error_cov=error_cov,
            gain_from=self.gain_from,
        )


def _closed_loop(model: PlantModel, sensors: SensorSuite, K: np.ndarray):
    A, C = model.A, sensors.C
    n = model.n
    if K.shape != (n, sensors.m):
        raise DimensionMismatch(f"K must be {n}x{sensors.m}, got {K.shape}")
    A_cl = A - K @ C @ A
    radius = spectral_radius(A_cl)
    if radius >= 1.0:
        raise DesignError(f"A - KCA is not Schur stable (spectral radius {radius:.6g})")
    I_KC = np.eye(n) - K @ C
    W = I_KC @ model.Q @ I_KC.T + K @ sensors.R @ K.T
    return A_cl, solve_lyapunov(A_cl, W)


def design(model: PlantModel, sensors: SensorSuite, gain_from: str = "prior") -> KalmanDesign:
    """
    Compute the steady-state filter for a plant and sensor suite.

    Args:
        model: plant (A, Q)
        sensors: stacked observation rows and measurement covariance
        gain_from: "prior" for the optimal gain P Cᵀ(C P Cᵀ + R)⁻¹, or
            "posterior" to evaluate the same formula at the filtered covariance

    Returns:
        KalmanDesign with a Schur stable A − KCA
    """
    if gain_from not in GAIN_CONVENTIONS:
        raise ValueError(f"gain_from must be one of {GAIN_CONVENTIONS}, got {gain_from!r}")
    if sensors.n != model.n:
        raise DimensionMismatch(
            f"sensors observe {sensors.n} states but the plant has {model.n}"
        )

    P = solve_dare_fixed_point(model.A, sensors.C, model.Q, sensors.R)
    P_post = posterior_covariance(P, sensors.C, sensors.R)
    K = kalman_gain(P if gain_from == "prior" else P_post, sensors.C, sensors.R)
    A_cl, error_cov = _closed_loop(model, sensors, K)

    logger.info(
        f"Kalman design: trace(P) = {np.trace(P):.6g}, "
        f"trace(error_cov) = {np.trace(error_cov):.6g}, gain from {gain_from} covariance"
    )
    return KalmanDesign(
        model=model,
        sensors=sensors,
        P=P,
        P_post=P_post,
        K=K,
        A_cl=A_cl,
        error_cov=error_cov,
        gain_from=gain_from,
    )


def run_centralized(kd: KalmanDesign, traj: Trajectory) -> np.ndarray:
    """
    Run the steady-state recursion from x̂(0) = 0.

    Returns:
        Array of shape (T+1, n) with x̂(k) in row k
    """
    n, m = kd.K.shape
    if traj.states.shape[1] != n or traj.measurements.shape[1] != m:
        raise DimensionMismatch(
            f"trajectory is {traj.states.shape[1]} states / {traj.measurements.shape[1]} "
            f"sensors but the filter expects {n} / {m}"
        )
    estimates = np.zeros((traj.horizon + 1, n))
    for k in range(traj.horizon):
        estimates[k + 1] = kd.A_cl @ estimates[k] + kd.K @ traj.measurements[k + 1]
    return estimates


def innovations(kd: KalmanDesign, traj: Trajectory, estimates: np.ndarray) -> np.ndarray:
    """y(k+1) − C A x̂(k) for k = 0..T−1."""
    CA = kd.sensors.C @ kd.model.A
    return traj.measurements[1:] - estimates[:-1] @ CA.T

"""
Lossless local decomposition of the steady-state Kalman filter.

With A − KCA = VΛV⁻¹ diagonal and distinct, every sensor i runs the local
filter

    z_i(k)     = y_i(k+1) − βᵀ ξ̂_i(k)
    ξ̂_i(k+1) = S ξ̂_i(k) + 1 z_i(k),     S = Λ + 1βᵀ

using only its own measurement, and the centralized estimate is recovered
exactly as x̂(k) = Σ_i F_i ξ̂_i(k) with F_i = V diag(V⁻¹K_i).

When A − KCA has complex eigenvalues the modal quantities are complex. A real
modal form (T, S_r, ones_r, F_r) is then exposed for the synchronization
layer: T maps every conjugate pair of modal coordinates to their real and
imaginary parts.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from evsync.core.errors import (
    ComplexSpectrumDisallowed,
    DimensionMismatch,
    ImaginaryResidue,
    InconsistentBetaSystem,
    NotObservable,
    PerturbationExhausted,
)
from evsync.core.matops import eig, eigvals, is_observable, solve_sylvester
from evsync.kalman import KalmanDesign
from evsync.plantsim import SensorSuite

logger = logging.getLogger("evsync.decomp")

PERTURB_SCALE = 1e-6
MAX_RETRIES = 20
COLLISION_TOL = 1e-8
RECONSTRUCTION_TOL = 1e-8
BETA_TOL = 1e-8
IMAG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    Phase-I quantities of the distributed estimator.

    Attributes:
        V: eigenvectors of A − K_used·CA (columns)
        lam: eigenvalues, the diagonal of Λ
        beta: shared output vector β
        G: per-sensor Sylvester solutions G_i
        S: Λ + 1βᵀ
        F: per-sensor fusion blocks F_i
        kalman: the Kalman design rebuilt around K_used
        T: real modal transform (identity for real spectra)
        S_r, ones_r, F_r: S, the ones vector and F_i in real modal coordinates
        retries: number of gain perturbations applied
    """

    V: np.ndarray
    lam: np.ndarray
    beta: np.ndarray
    G: Tuple[np.ndarray, ...]
    S: np.ndarray
    F: Tuple[np.ndarray, ...]
    kalman: KalmanDesign
    T: np.ndarray
    S_r: np.ndarray
    ones_r: np.ndarray
    F_r: Tuple[np.ndarray, ...]
    retries: int = 0

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def m(self) -> int:
        return len(self.G)

    @property
    def Lambda(self) -> np.ndarray:
        return np.diag(self.lam)

    @property
    def K_used(self) -> np.ndarray:
        return self.kalman.K

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.V)

    def beta_residual(self) -> float:
        """max_i ||βᵀG_i − C_iA||."""
        sensors, A = self.kalman.sensors, self.kalman.model.A
        return max(
            float(np.linalg.norm(self.beta @ G_i - sensors.row(i) @ A))
            for i, G_i in enumerate(self.G)
        )

    def sylvester_residual(self) -> float:
        """max_i ||(G_i − 1C_i)A − ΛG_i||."""
        sensors, A = self.kalman.sensors, self.kalman.model.A
        ones = np.ones((self.n, 1))
        return max(
            float(np.linalg.norm((G_i - ones @ sensors.row(i)) @ A - self.Lambda @ G_i))
            for i, G_i in enumerate(self.G)
        )

    def reconstruction_error(self) -> float:
        """||VΛV⁻¹ − (A − K_used CA)|| relative to ||A − K_used CA||."""
        A_cl = self.kalman.A_cl
        recon = self.V @ self.Lambda @ np.linalg.inv(self.V)
        return float(np.linalg.norm(recon - A_cl) / max(np.linalg.norm(A_cl), 1e-300))

    def spectrum_mismatch(self) -> float:
        """Largest distance from an eigenvalue of S to the nearest eigenvalue of A."""
        s_eigs = eigvals(self.S)
        a_eigs = eigvals(self.kalman.model.A)
        return float(np.max(np.min(np.abs(s_eigs[:, None] - a_eigs[None, :]), axis=1)))


@dataclass(frozen=True)
class LocalFilterState:
    """State ξ̂_i(k) of one local filter and its last output z_i."""

    xi_hat: np.ndarray
    z_last: float = 0.0

    @classmethod
    def zero(cls, dec: Decomposition) -> "LocalFilterState":
        dtype = complex if dec.is_complex else float
        return cls(xi_hat=np.zeros(dec.n, dtype=dtype))


def real_part(x, what: str = "value", tol: float = IMAG_TOL) -> np.ndarray:
    """Drop the imaginary part after checking that it is negligible."""
    arr = np.asarray(x)
    if not np.iscomplexobj(arr):
        return arr
    scale = max(1.0, float(np.max(np.abs(arr.real), initial=0.0)))
    residue = float(np.max(np.abs(arr.imag), initial=0.0))
    if residue > tol * scale:
        raise ImaginaryResidue(f"{what} has imaginary part {residue:.3g}")
    return arr.real.copy()


def fusion_blocks(V: np.ndarray, K: np.ndarray) -> List[np.ndarray]:
    """F_i = V diag(V⁻¹K_i) for every column K_i of K."""
    W = np.linalg.solve(V, K)
    return [V * W[:, i] for i in range(K.shape[1])]


def _pair_conjugates(lam: np.ndarray, V: np.ndarray) -> List[Tuple[int, int]]:
    """
    Match every eigenvalue with negative imaginary part to its conjugate.

    The pair members are made exact conjugates (eigenvalues and eigenvector
    columns) so that the real modal form is exactly real.
    """
    pairs = []
    upper = [q for q in range(lam.size) if lam[q].imag > IMAG_TOL]
    for p in range(lam.size):
        if lam[p].imag >= -IMAG_TOL:
            continue
        q = min(upper, key=lambda j: abs(lam[j] - np.conj(lam[p])))
        upper.remove(q)
        lam[q] = np.conj(lam[p])
        V[:, q] = np.conj(V[:, p])
        pairs.append((p, q))
    return pairs


def real_modal_transform(lam: np.ndarray, pairs: List[Tuple[int, int]]) -> np.ndarray:
    """
    T with (Tξ)_p = Re ξ_p and (Tξ)_q = Im ξ_q for every pair (p, q).

    Rows of real eigenvalues are rows of the identity.
    """
    n = lam.size
    T = np.eye(n, dtype=complex)
    for p, q in pairs:
        T[p, p], T[p, q] = 0.5, 0.5
        T[q, p], T[q, q] = 0.5j, -0.5j
    return T


def _admissible(lam: np.ndarray, A_eigs: np.ndarray, scale: float) -> Optional[str]:
    """None when Λ is distinct and disjoint from spec(A), otherwise the reason."""
    tol = COLLISION_TOL * max(1.0, scale)
    if lam.size > 1:
        gaps = np.abs(lam[:, None] - lam[None, :]) + np.diag(np.full(lam.size, np.inf))
        if np.min(gaps) <= tol:
            return f"repeated eigenvalues of A - KCA (gap {np.min(gaps):.3g})"
    collision = np.min(np.abs(lam[:, None] - A_eigs[None, :]))
    if collision <= tol:
        return f"A - KCA shares an eigenvalue with A (gap {collision:.3g})"
    return None


def build(kd: KalmanDesign, sensors: Optional[SensorSuite] = None,
          allow_complex: bool = False, perturb_scale: float = PERTURB_SCALE,
          max_retries: int = MAX_RETRIES, seed: int = 0) -> Decomposition:
    """
    Decompose the steady-state Kalman filter into m local filters.

    Args:
        kd: centralized Kalman design
        sensors: sensor suite; defaults to the one the design was built for
        allow_complex: accept complex eigenvalues of A − KCA
        perturb_scale: relative magnitude of gain perturbations
        max_retries: perturbation attempts before giving up
        seed: seed of the perturbation stream

    Returns:
        Decomposition built around the (possibly perturbed) gain K_used
    """
    sensors = sensors if sensors is not None else kd.sensors
    if sensors.C.shape != kd.sensors.C.shape:
        raise DimensionMismatch(
            f"sensor suite is {sensors.C.shape} but the design uses {kd.sensors.C.shape}"
        )
    A, C = kd.model.A, sensors.C
    n, m = A.shape[0], sensors.m
    if not is_observable(A, C):
        raise NotObservable("(A, C) is not jointly observable")

    A_eigs = eigvals(A)
    rng = np.random.default_rng(seed)
    K = kd.K.copy()
    norm_K = float(np.linalg.norm(K, 2))
    # with K = 0 a relative perturbation would vanish
    magnitude = perturb_scale * norm_K if norm_K > 0 else perturb_scale

    retries = 0
    while True:
        A_cl = A - K @ C @ A
        spec = eig(A_cl)
        lam, V = spec.eigenvalues.copy(), spec.eigenvectors.copy()
        is_complex = bool(np.any(np.abs(lam.imag) > IMAG_TOL))
        if is_complex and not allow_complex:
            raise ComplexSpectrumDisallowed(
                f"A - KCA has complex eigenvalues {np.round(lam, 6).tolist()}; "
                f"enable allow_complex to use the complex decomposition"
            )
        reason = _admissible(lam, A_eigs, float(np.linalg.norm(A_cl, 2)))
        if reason is None:
            recon = V @ np.diag(lam) @ np.linalg.inv(V)
            error = np.linalg.norm(recon - A_cl) / max(np.linalg.norm(A_cl), 1e-300)
            if error > RECONSTRUCTION_TOL:
                reason = f"eigendecomposition reconstruction error {error:.3g}"
        if reason is None:
            break
        if retries >= max_retries:
            raise PerturbationExhausted(
                f"no admissible gain after {max_retries} perturbations: {reason}"
            )
        retries += 1
        logger.debug(f"perturbing Kalman gain (attempt {retries}): {reason}")
        K = kd.K + magnitude * rng.uniform(-1.0, 1.0, size=K.shape)

    if retries:
        logger.info(f"Kalman gain perturbed {retries} time(s) to make A - KCA admissible")
        kd = kd.with_gain(K)

    if is_complex:
        pairs = _pair_conjugates(lam, V)
    else:
        lam, V, pairs = lam.real.copy(), V.real.copy(), []

    Lam = np.diag(lam)
    ones = np.ones((n, 1))
    G = [solve_sylvester(Lam, A, ones @ sensors.row(i) @ A) for i in range(m)]

    stacked_G = np.hstack(G)
    stacked_CA = np.hstack([sensors.row(i) @ A for i in range(m)])
    beta, *_ = np.linalg.lstsq(stacked_G.T, stacked_CA.ravel(), rcond=None)
    residual = float(np.linalg.norm(beta @ stacked_G - stacked_CA.ravel()))
    bound = BETA_TOL * max(1.0, float(np.linalg.norm(A, 2))) * max(
        1.0, float(np.linalg.norm(beta))
    )
    if residual > bound:
        raise InconsistentBetaSystem(
            f"stacked beta system residual {residual:.3g} exceeds {bound:.3g}"
        )

    S = Lam + ones @ beta.reshape(1, -1)
    F = fusion_blocks(V, K)

    if is_complex:
        T = real_modal_transform(lam, pairs)
        T_inv = np.linalg.inv(T)
        S_r = real_part(T @ S @ T_inv, "real modal form of S")
        ones_r = real_part(T @ np.ones(n), "real modal form of the ones vector")
        F_r = [real_part(F_i @ T_inv, f"real modal form of F_{i}") for i, F_i in enumerate(F)]
    else:
        T = np.eye(n)
        S_r, ones_r, F_r = S, np.ones(n), F

    dec = Decomposition(
        V=V,
        lam=lam,
        beta=beta,
        G=tuple(G),
        S=S,
        F=tuple(F),
        kalman=kd,
        T=T,
        S_r=S_r,
        ones_r=ones_r,
        F_r=tuple(F_r),
        retries=retries,
    )
    logger.debug(
        f"decomposition residuals: beta {dec.beta_residual():.3g}, "
        f"sylvester {dec.sylvester_residual():.3g}, spec(S) vs spec(A) "
        f"{dec.spectrum_mismatch():.3g}"
    )
    if dec.spectrum_mismatch() > 1e-6:
        logger.warning(
            f"spectrum of S differs from spectrum of A by {dec.spectrum_mismatch():.3g}"
        )
    return dec


def local_filter_step(dec: Decomposition, i: int, state: LocalFilterState,
                      y_next: float) -> LocalFilterState:
    """
    Advance sensor i's local filter with its measurement y_i(k+1).

    Returns:
        The new state carrying ξ̂_i(k+1) and z_i(k)
    """
    if not 0 <= i < dec.m:
        raise DimensionMismatch(f"sensor index {i} outside 0..{dec.m - 1}")
    z = y_next - dec.beta @ state.xi_hat
    xi_next = dec.S @ state.xi_hat + z
    return LocalFilterState(xi_hat=xi_next, z_last=z)


def local_filter_step_all(dec: Decomposition, xi: np.ndarray,
                          y_next: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Vectorized local_filter_step for every sensor.

    Args:
        xi: (m, n) array, row i is ξ̂_i(k)
        y_next: (m,) measurements y(k+1)

    Returns:
        (ξ̂(k+1) as an (m, n) array, z(k) as an (m,) array)
    """
    z = y_next - xi @ dec.beta
    return xi @ dec.S.T + z[:, None], z


def fusion_matrix(dec: Decomposition) -> np.ndarray:
    """F = [F_1, ..., F_m], acting on stacked local filter states."""
    return np.hstack(dec.F)


def fusion_matrix_real(dec: Decomposition) -> np.ndarray:
    """[F_r,1, ..., F_r,m], acting on stacked real modal coordinates."""
    return np.hstack(dec.F_r)


def fuse(dec: Decomposition, xi: np.ndarray) -> np.ndarray:
    """Σ_i F_i ξ̂_i as a real vector."""
    return real_part(fusion_matrix(dec) @ np.ravel(xi), "fused estimate")


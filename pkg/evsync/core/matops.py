"""
Numerical linear-algebra and control primitives shared by every evsync module.

All functions are pure: they take numpy arrays, never modify them, and return
new arrays. Matrices are plain ``numpy.ndarray`` objects validated on entry by
:func:`as_matrix`.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from evsync.core.errors import (
    CommonEigenvalue,
    ConvergenceFailure,
    DimensionMismatch,
    InfeasibleZeta,
    LinalgError,
    MaxIterationsExceeded,
    NonSquare,
    NotControllable,
    NotObservable,
    SingularInnovation,
    SingularSolve,
)

logger = logging.getLogger("evsync.matops")

DARE_TOL = 1e-12
DARE_MAX_ITER = 10**6
RICCATI_TOL = 1e-10
RICCATI_MAX_ITER = 10**6
RANK_TOL = 1e-9
SYLVESTER_TOL = 1e-10
# condition number above which C P Cᵀ + R is treated as singular
INNOVATION_COND_LIMIT = 1e12


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with column-aligned eigenvectors, sorted by (real, imag)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def is_real(self) -> bool:
        return bool(np.all(np.abs(self.eigenvalues.imag) == 0.0))


def as_matrix(value, name: str = "matrix", complex_ok: bool = False) -> np.ndarray:
    """
    Convert ``value`` to a finite 2-D array.

    Scalars become 1x1 matrices and 1-D sequences become row vectors.

    Args:
        value: Anything ``numpy.asarray`` accepts
        name: Name used in error messages
        complex_ok: Keep a complex dtype instead of forcing float

    Returns:
        A new 2-D array
    """
    dtype = complex if complex_ok and np.iscomplexobj(value) else float
    try:
        arr = np.array(value, dtype=dtype)
    except (TypeError, ValueError) as e:
        raise LinalgError(f"{name}: cannot be converted to a matrix ({e})")
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionMismatch(f"{name}: expected a matrix, got {arr.ndim}-d array")
    if not np.all(np.isfinite(arr)):
        raise LinalgError(f"{name}: entries must be finite")
    return arr


def _require_square(M: np.ndarray, name: str) -> None:
    if M.shape[0] != M.shape[1]:
        raise NonSquare(f"{name} must be square, got shape {M.shape}")


def symmetrize(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


def is_psd(M, tol: float = 1e-10) -> bool:
    """Symmetric with eigenvalues >= -tol."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.all(np.isfinite(M)):
        return False
    if not np.allclose(M, M.T, rtol=0.0, atol=tol):
        return False
    return bool(np.min(np.linalg.eigvalsh(symmetrize(M))) >= -tol)


def psd_sqrt(M) -> np.ndarray:
    """Symmetric square root R with R R = M; negative rounding noise is clipped."""
    w, V = np.linalg.eigh(symmetrize(as_matrix(M, "M")))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


def eig(M) -> Spectrum:
    """
    Full eigendecomposition with deterministic ordering.

    Eigenvalues are sorted by real part, then imaginary part, so that every
    quantity derived from V and Λ is reproducible across runs.

    Args:
        M: Square real (or complex) matrix

    Returns:
        Spectrum with eigenvectors as columns aligned to eigenvalues
    """
    M = as_matrix(M, "M", complex_ok=True)
    _require_square(M, "M")
    try:
        values, vectors = np.linalg.eig(M)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailure(f"eigendecomposition did not converge: {e}")
    values = np.asarray(values, dtype=complex)
    vectors = np.asarray(vectors, dtype=complex)
    order = np.lexsort((values.imag, values.real))
    return Spectrum(eigenvalues=values[order], eigenvectors=vectors[:, order])


def eigvals(M) -> np.ndarray:
    """Eigenvalues only, in the same order as :func:`eig`."""
    M = as_matrix(M, "M", complex_ok=True)
    _require_square(M, "M")
    try:
        values = np.asarray(np.linalg.eigvals(M), dtype=complex)
    except np.linalg.LinAlgError as e:
        raise ConvergenceFailure(f"eigenvalue computation did not converge: {e}")
    return values[np.lexsort((values.imag, values.real))]


def spectral_radius(M) -> float:
    return float(np.max(np.abs(eigvals(M))))


def mahler_measure(M) -> float:
    """
    Product of |λ| over the eigenvalues on or outside the unit circle.

    Returns 1.0 when M is Schur stable.
    """
    magnitudes = np.abs(eigvals(M))
    unstable = magnitudes[magnitudes >= 1.0]
    return float(np.prod(unstable)) if unstable.size else 1.0


def _matrix_rank(M: np.ndarray, rank_tol: float) -> int:
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rank_tol * sv[0]))


def observability_matrix(A, C) -> np.ndarray:
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    _require_square(A, "A")
    if C.shape[1] != A.shape[0]:
        raise DimensionMismatch(
            f"C has {C.shape[1]} columns but A is {A.shape[0]}x{A.shape[0]}"
        )
    blocks = [C]
    for _ in range(A.shape[0] - 1):
        blocks.append(blocks[-1] @ A)
    return np.vstack(blocks)


def is_observable(A, C, rank_tol: float = RANK_TOL) -> bool:
    """Rank test on the n-block observability matrix."""
    O = observability_matrix(A, C)
    return _matrix_rank(O, rank_tol) == O.shape[1]


def is_controllable(S, B, rank_tol: float = RANK_TOL) -> bool:
    """Rank test on the controllability matrix, by duality with observability."""
    S = as_matrix(S, "S")
    B = as_matrix(B, "B")
    if B.shape[0] != S.shape[0] and B.shape[0] == 1:
        B = B.T
    if B.shape[0] != S.shape[0]:
        raise DimensionMismatch(f"B has {B.shape[0]} rows but S is {S.shape[0]}x{S.shape[0]}")
    return is_observable(S.T, B.T, rank_tol)


def innovation_covariance(P: np.ndarray, C: np.ndarray, R: np.ndarray) -> np.ndarray:
    innov = C @ P @ C.T + R
    if np.linalg.cond(innov) > INNOVATION_COND_LIMIT:
        raise SingularInnovation(
            f"C P C^T + R is singular (condition number {np.linalg.cond(innov):.3g})"
        )
    return innov


def riccati_step(P: np.ndarray, A: np.ndarray, C: np.ndarray, Q: np.ndarray,
                 R: np.ndarray) -> np.ndarray:
    """One step of the prediction-form Riccati recursion, symmetrized."""
    innov = innovation_covariance(P, C, R)
    APCt = A @ P @ C.T
    nxt = A @ P @ A.T - APCt @ np.linalg.solve(innov, APCt.T) + Q
    return symmetrize(nxt)


def _check_filter_dims(A, C, Q, R):
    A = as_matrix(A, "A")
    C = as_matrix(C, "C")
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    _require_square(A, "A")
    n, m = A.shape[0], C.shape[0]
    if C.shape[1] != n:
        raise DimensionMismatch(f"C must have {n} columns, got {C.shape[1]}")
    if Q.shape != (n, n):
        raise DimensionMismatch(f"Q must be {n}x{n}, got {Q.shape}")
    if R.shape != (m, m):
        raise DimensionMismatch(f"R must be {m}x{m}, got {R.shape}")
    return A, C, Q, R


def solve_dare_fixed_point(A, C, Q, R, tol: float = DARE_TOL,
                           max_iter: int = DARE_MAX_ITER) -> np.ndarray:
    """
    Steady-state prediction covariance by iterating the Riccati recursion.

    Starts from P0 = Q and stops when the infinity norm of the update falls
    to ``tol``.

    Args:
        A: n x n dynamics matrix
        C: m x n output matrix
        Q: process noise covariance
        R: measurement noise covariance
        tol: convergence tolerance on ||P_{t+1} - P_t||_inf
        max_iter: iteration cap

    Returns:
        Symmetric PSD fixed point P
    """
    A, C, Q, R = _check_filter_dims(A, C, Q, R)
    if not is_observable(A, C):
        raise NotObservable("(A, C) is not observable; the Riccati recursion has no unique limit")

    P = symmetrize(Q.copy())
    for iteration in range(1, max_iter + 1):
        nxt = riccati_step(P, A, C, Q, R)
        if not np.all(np.isfinite(nxt)):
            raise ConvergenceFailure("Riccati recursion diverged")
        if np.linalg.norm(nxt - P, np.inf) <= tol:
            logger.debug(f"DARE fixed point reached after {iteration} iterations")
            return nxt
        P = nxt
    raise MaxIterationsExceeded(f"DARE iteration did not converge in {max_iter} iterations")


def kalman_gain(P, C, R) -> np.ndarray:
    """K = P Cᵀ (C P Cᵀ + R)⁻¹, solved rather than inverted."""
    P = as_matrix(P, "P")
    C = as_matrix(C, "C")
    R = as_matrix(R, "R")
    innov = innovation_covariance(P, C, R)
    # P and innov are symmetric, so K = (innov \ C P)ᵀ
    return np.linalg.solve(innov, C @ P).T


def posterior_covariance(P, C, R) -> np.ndarray:
    """Filtered covariance P − P Cᵀ (C P Cᵀ + R)⁻¹ C P."""
    P = as_matrix(P, "P")
    C = as_matrix(C, "C")
    innov = innovation_covariance(P, C, as_matrix(R, "R"))
    PCt = P @ C.T
    return symmetrize(P - PCt @ np.linalg.solve(innov, PCt.T))


def solve_lyapunov(M, W) -> np.ndarray:
    """X with M X Mᵀ − X + W = 0 (M must be Schur stable)."""
    M = as_matrix(M, "M")
    W = as_matrix(W, "W")
    if spectral_radius(M) >= 1.0:
        raise LinalgError("discrete Lyapunov equation needs a Schur stable matrix")
    return symmetrize(la.solve_discrete_lyapunov(M, W))


def _gain_term(P: np.ndarray, S: np.ndarray, B: np.ndarray) -> np.ndarray:
    SPB = S.T @ P @ B
    return (SPB @ SPB.T) / (B.T @ P @ B).item()


def modified_riccati_residual(P, S, B, zeta: float) -> np.ndarray:
    """P − SᵀPS + (1−ζ²)·SᵀPBBᵀPS / (BᵀPB); positive definite iff P certifies ζ."""
    P = as_matrix(P, "P")
    S = as_matrix(S, "S")
    B = as_matrix(B, "B").reshape(-1, 1)
    return symmetrize(P - S.T @ P @ S + (1.0 - zeta**2) * _gain_term(P, S, B))


def solve_modified_riccati(S, B, zeta: float, eps: Optional[float] = None,
                           tol: float = RICCATI_TOL,
                           max_iter: int = RICCATI_MAX_ITER) -> np.ndarray:
    """
    Solve the modified Riccati inequality as an ε-shifted equation.

    Iterates P ← SᵀPS − (1−ζ²)·SᵀPBBᵀPS/(BᵀPB) + εI from P0 = I until the
    relative Frobenius change is at most ``tol``. The fixed point makes the
    inequality residual equal to εI, which is checked on return.

    Args:
        S: n x n system matrix
        B: n-vector (input direction)
        zeta: design parameter with zeta * Mahler(S) < 1
        eps: shift; defaults to 1e-6 * trace(SᵀS) / n
        tol: relative convergence tolerance
        max_iter: iteration cap

    Returns:
        Symmetric positive definite P
    """
    S = as_matrix(S, "S")
    _require_square(S, "S")
    B = as_matrix(B, "B").reshape(-1, 1)
    n = S.shape[0]
    if B.shape[0] != n:
        raise DimensionMismatch(f"B must have {n} entries, got {B.shape[0]}")
    if not 0.0 < zeta <= 1.0:
        raise InfeasibleZeta(f"zeta must lie in (0, 1], got {zeta}")
    mahler = mahler_measure(S)
    if zeta * mahler >= 1.0:
        raise InfeasibleZeta(
            f"zeta * Mahler(S) = {zeta:.6g} * {mahler:.6g} >= 1; the modified "
            f"Riccati inequality has no solution"
        )
    if not is_controllable(S, B):
        raise NotControllable("(S, B) is not controllable")
    if eps is None:
        eps = 1e-6 * max(np.trace(S.T @ S) / n, np.finfo(float).tiny)
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")

    gamma = 1.0 - zeta**2
    shift = eps * np.eye(n)
    P = np.eye(n)
    for iteration in range(1, max_iter + 1):
        nxt = symmetrize(S.T @ P @ S - gamma * _gain_term(P, S, B) + shift)
        change = np.linalg.norm(nxt - P, "fro")
        P = nxt
        if change <= tol * np.linalg.norm(P, "fro"):
            logger.debug(f"modified Riccati fixed point after {iteration} iterations")
            break
    else:
        raise MaxIterationsExceeded(
            f"modified Riccati iteration did not converge in {max_iter} iterations"
        )

    margin = float(np.min(np.linalg.eigvalsh(modified_riccati_residual(P, S, B, zeta))))
    if margin < eps / 2:
        raise ConvergenceFailure(
            f"modified Riccati residual margin {margin:.3g} is below eps/2 = {eps / 2:.3g}"
        )
    return P


def solve_sylvester(Lam, A, RHS, tol: float = SYLVESTER_TOL) -> np.ndarray:
    """
    Solve G A − Λ G = RHS for G.

    Args:
        Lam: square (possibly complex) matrix Λ
        A: square real matrix
        RHS: right-hand side with Λ's row count and A's column count
        tol: relative residual tolerance

    Returns:
        The unique solution G (complex when any operand is complex)
    """
    Lam = as_matrix(Lam, "Lambda", complex_ok=True)
    A = as_matrix(A, "A")
    RHS = as_matrix(RHS, "RHS", complex_ok=True)
    _require_square(Lam, "Lambda")
    _require_square(A, "A")
    if RHS.shape != (Lam.shape[0], A.shape[0]):
        raise DimensionMismatch(
            f"RHS must be {Lam.shape[0]}x{A.shape[0]}, got {RHS.shape}"
        )

    scale = np.linalg.norm(A, 2) + np.linalg.norm(Lam, 2)
    gap = np.min(np.abs(eigvals(Lam)[:, None] - eigvals(A)[None, :]))
    if gap <= 1e-12 * max(scale, 1.0):
        raise CommonEigenvalue(f"Lambda and A share an eigenvalue (gap {gap:.3g})")

    if np.iscomplexobj(Lam) or np.iscomplexobj(RHS):
        # scipy needs one dtype for all operands once Lambda is complex
        Lam, A, RHS = Lam.astype(complex), A.astype(complex), RHS.astype(complex)
    try:
        G = la.solve_sylvester(-Lam, A, RHS)
    except (la.LinAlgError, ValueError) as e:
        raise SingularSolve(f"Sylvester solve failed: {e}")

    residual = np.linalg.norm(G @ A - Lam @ G - RHS)
    bound = tol * max(1.0, scale * np.linalg.norm(G))
    if not np.isfinite(residual) or residual > bound:
        raise SingularSolve(f"Sylvester residual {residual:.3g} exceeds {bound:.3g}")
    return G

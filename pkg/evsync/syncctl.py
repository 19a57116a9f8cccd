"""
Event-triggered synchronization of linear agents over a communication graph.

Each agent i runs

    η_i(k+1) = S η_i(k) + B u_i(k) + L_i z_i(k)
    u_i(k)   = Γ Σ_j a_ij (η̂_j(k) − η̂_i(k))

where η̂_i(k) = S^(k−k_s) η_i(k_s) is the open-loop prediction of the last
state agent i broadcast. Agent i broadcasts again when

    f_i(k) = ||η̂_i(k) − η_i(k)||² − (c0 + c1 ρ^k) >= 0.

The network average evolves as η̄(k+1) = S η̄(k) + mean_i L_i z_i(k) whatever
the triggering pattern, because the control terms cancel on an undirected
graph.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from evsync.core.errors import (
    ClockSkew,
    DimensionMismatch,
    Infeasible,
    NotControllable,
    ZetaOutOfRange,
)
from evsync.core.matops import (
    as_matrix,
    is_controllable,
    mahler_measure,
    modified_riccati_residual,
    solve_modified_riccati,
    spectral_radius,
)
from evsync.core.netgraph import (
    CommGraph,
    LaplacianSpectrum,
    feasibility_threshold,
    laplacian,
)

logger = logging.getLogger("evsync.syncctl")

INPUT_RETRIES = 20


@dataclass(frozen=True)
class FeasibilityCertificate:
    """Numbers behind the synchronization feasibility decision."""

    mahler: float
    threshold: float
    feasible: bool
    mu2: float
    mu_max: float
    zeta: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "mahler": self.mahler,
            "threshold": None if math.isinf(self.threshold) else self.threshold,
            "feasible": self.feasible,
            "mu2": self.mu2,
            "mu_max": self.mu_max,
            "zeta": self.zeta,
        }


@dataclass(frozen=True)
class TriggerParams:
    """Threshold c0 + c1 ρ^k of the triggering function."""

    c0: float = 0.1
    c1: float = 1.0
    rho: float = 0.95

    def __post_init__(self):
        problems = trigger_problems(self.c0, self.c1, self.rho)
        if problems:
            raise ValueError("; ".join(problems))

    def threshold(self, k: int) -> float:
        return self.c0 + self.c1 * self.rho**k


def trigger_problems(c0, c1, rho) -> List[str]:
    problems = []
    if not (isinstance(c0, (int, float)) and c0 >= 0 and math.isfinite(c0)):
        problems.append(f"trigger c0 must be a finite number >= 0, got {c0!r}")
    if not (isinstance(c1, (int, float)) and c1 >= 0 and math.isfinite(c1)):
        problems.append(f"trigger c1 must be a finite number >= 0, got {c1!r}")
    if not (isinstance(rho, (int, float)) and 0 < rho < 1):
        problems.append(f"trigger rho must lie in (0, 1), got {rho!r}")
    if not problems and c0 + c1 <= 0:
        problems.append("trigger c0 + c1 must be positive")
    return problems


@dataclass(frozen=True, eq=False)
class SyncDesign:
    """
    Synchronization gain and its certificate.

    Attributes:
        S: agent dynamics (n x n)
        B: input matrix (n x p)
        Gamma: feedback gain (p x n)
        P_lyap: solution of the modified Riccati inequality
        zeta: design parameter with Mahler(S) < 1/zeta <= threshold
        certificate: feasibility numbers
        margin: minimum eigenvalue of the inequality residual
        eps: shift used when solving for P_lyap
    """

    S: np.ndarray
    B: np.ndarray
    Gamma: np.ndarray
    P_lyap: np.ndarray
    zeta: float
    certificate: FeasibilityCertificate
    margin: float
    eps: float

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def mu2(self) -> float:
        return self.certificate.mu2

    @property
    def mu_max(self) -> float:
        return self.certificate.mu_max

    @property
    def BGamma(self) -> np.ndarray:
        return self.B @ self.Gamma

    def lift(self, m: int) -> "SyncDesign":
        """
        Kronecker lift to m copies: S̃ = I⊗S, B̃ = I⊗B, Γ̃ = I⊗Γ.

        Γ is not redesigned; the Laplacian condition is unchanged by the lift.
        """
        I = np.eye(m)
        return replace(
            self,
            S=np.kron(I, self.S),
            B=np.kron(I, self.B),
            Gamma=np.kron(I, self.Gamma),
            P_lyap=np.kron(I, self.P_lyap),
        )


@dataclass(frozen=True)
class AgentState:
    """Snapshot of one agent's synchronization bookkeeping."""

    eta: np.ndarray
    last_broadcast_value: np.ndarray
    last_broadcast_time: int
    trigger_count: int = 0


@dataclass
class EventRecord:
    """Triggering outcome of one round."""

    k: int
    triggered: np.ndarray
    eps_sq: np.ndarray
    threshold: float


@dataclass
class NetworkState:
    """
    All agents of one trial, stored as arrays (one row per agent).

    ``held`` is the current held prediction S^(k−k_s) η_i(k_s) of every agent,
    advanced incrementally each round.
    """

    eta: np.ndarray
    held_value: np.ndarray
    held: np.ndarray
    last_broadcast: np.ndarray
    trigger_count: np.ndarray
    k: int = 0
    event_log: List[EventRecord] = field(default_factory=list)
    consistency_residuals: List[float] = field(default_factory=list)
    identity_drift: List[float] = field(default_factory=list)

    @classmethod
    def initial(cls, eta0) -> "NetworkState":
        """
        State at k = 0 after the mandatory initial broadcast of every agent.

        Args:
            eta0: (m, d) initial agent states
        """
        eta0 = np.array(eta0, dtype=float)
        if eta0.ndim != 2:
            raise DimensionMismatch(f"initial states must be (m, d), got {eta0.shape}")
        m = eta0.shape[0]
        state = cls(
            eta=eta0,
            held_value=eta0.copy(),
            held=eta0.copy(),
            last_broadcast=np.zeros(m, dtype=int),
            trigger_count=np.zeros(m, dtype=int),
        )
        state.event_log.append(
            EventRecord(k=0, triggered=np.ones(m, dtype=bool), eps_sq=np.zeros(m),
                        threshold=math.nan)
        )
        return state

    @property
    def m(self) -> int:
        return self.eta.shape[0]

    @property
    def agents(self) -> List[AgentState]:
        return [self.agent(i) for i in range(self.m)]

    def agent(self, i: int) -> AgentState:
        return AgentState(
            eta=self.eta[i].copy(),
            last_broadcast_value=self.held_value[i].copy(),
            last_broadcast_time=int(self.last_broadcast[i]),
            trigger_count=int(self.trigger_count[i]),
        )

    def broadcasts(self) -> np.ndarray:
        """(rounds, m) boolean matrix of broadcasts for k = 0..current."""
        return np.array([rec.triggered for rec in self.event_log])


# Design


def check_feasibility(S, spec: LaplacianSpectrum) -> FeasibilityCertificate:
    """
    Check Mahler(S) against the graph's synchronization threshold.

    Raises:
        Infeasible: Mahler(S) >= (1 + mu2/mum) / (1 − mu2/mum)
    """
    mahler = mahler_measure(S)
    threshold = feasibility_threshold(spec)
    if not mahler < threshold:
        raise Infeasible(mahler, threshold)
    return FeasibilityCertificate(
        mahler=mahler, threshold=threshold, feasible=True,
        mu2=spec.mu2, mu_max=spec.mu_max,
    )


def choose_zeta(S, spec: LaplacianSpectrum, requested: Optional[float] = None) -> float:
    """
    Pick ζ with Mahler(S) < 1/ζ <= threshold.

    A requested value is validated and returned unchanged. Otherwise 1/ζ is the
    midpoint of (Mahler(S), threshold]; for an unbounded threshold 1/ζ is
    twice the Mahler measure.

    Raises:
        ZetaOutOfRange: the requested value violates either bound
    """
    cert = check_feasibility(S, spec)
    if requested is not None:
        if not 0.0 < requested <= 1.0:
            raise ZetaOutOfRange(f"zeta must lie in (0, 1], got {requested}")
        inverse = 1.0 / requested
        if not cert.mahler < inverse:
            raise ZetaOutOfRange(
                f"1/zeta = {inverse:.6g} is not above Mahler(S) = {cert.mahler:.6g}"
            )
        if not inverse <= cert.threshold:
            raise ZetaOutOfRange(
                f"1/zeta = {inverse:.6g} exceeds the threshold {cert.threshold:.6g}"
            )
        return float(requested)

    if math.isinf(cert.threshold):
        inverse = 2.0 * cert.mahler
    else:
        inverse = 0.5 * (cert.mahler + cert.threshold)
    return 1.0 / inverse


def gamma_from(P, S, B, spec: LaplacianSpectrum) -> np.ndarray:
    """Γ = (2 / (mu2 + mum)) · BᵀPS / (BᵀPB)."""
    P, S, B = as_matrix(P, "P"), as_matrix(S, "S"), _column(B, S.shape[0])
    total = spec.mu2 + spec.mu_max
    if total <= 0:
        # a single agent has no neighbours to synchronize with
        return np.zeros((B.shape[1], S.shape[0]))
    return (2.0 / total) * (B.T @ P @ S) / (B.T @ P @ B).item()


def design_gamma(S, B, spec: LaplacianSpectrum, zeta: float,
                 eps: Optional[float] = None) -> SyncDesign:
    """
    Design the synchronizing gain Γ.

    Args:
        S: agent dynamics
        B: input vector, (S, B) controllable
        spec: Laplacian spectrum of a connected graph
        zeta: validated design parameter (see choose_zeta)
        eps: shift of the modified Riccati equation

    Returns:
        SyncDesign with its certificate
    """
    S = as_matrix(S, "S")
    n = S.shape[0]
    B = _column(B, n)
    cert = check_feasibility(S, spec)
    if not is_controllable(S, B):
        raise NotControllable("(S, B) is not controllable")
    if eps is None:
        eps = 1e-6 * max(np.trace(S.T @ S) / n, np.finfo(float).tiny)

    P = solve_modified_riccati(S, B, zeta, eps=eps)
    margin = float(np.min(np.linalg.eigvalsh(modified_riccati_residual(P, S, B, zeta))))
    Gamma = gamma_from(P, S, B, spec)
    logger.info(
        f"Sync design: Mahler(S) = {cert.mahler:.6g}, threshold = {cert.threshold:.6g}, "
        f"zeta = {zeta:.6g}, Gamma = {np.round(Gamma.ravel(), 6).tolist()}"
    )
    return SyncDesign(
        S=S,
        B=B,
        Gamma=Gamma,
        P_lyap=P,
        zeta=float(zeta),
        certificate=replace(cert, zeta=float(zeta)),
        margin=margin,
        eps=float(eps),
    )


def default_input_matrix(S, seed: int = 0, retries: int = INPUT_RETRIES) -> np.ndarray:
    """
    The ones vector, or a seeded random vector if (S, ones) is not controllable.

    Raises:
        NotControllable: no controllable direction found
    """
    S = as_matrix(S, "S")
    n = S.shape[0]
    B = np.ones((n, 1))
    if is_controllable(S, B):
        return B
    rng = np.random.default_rng(seed)
    for attempt in range(1, retries + 1):
        B = rng.standard_normal((n, 1))
        if is_controllable(S, B):
            logger.info(f"(S, 1) is not controllable; using a random B (attempt {attempt})")
            return B
    raise NotControllable(f"no controllable input direction found in {retries} draws")


def closed_loop_radii(design: SyncDesign, spec: LaplacianSpectrum) -> List[Tuple[float, float]]:
    """
    Spectral radius of S − μ BΓ for every nonzero Laplacian eigenvalue μ.

    The noise-free full-transmission disagreement dynamics contract iff all
    radii are below 1.
    """
    return [
        (mu, spectral_radius(design.S - mu * design.BGamma))
        for mu in spec.mu[1:]
    ]


def _column(B, n: int) -> np.ndarray:
    B = as_matrix(B, "B")
    if B.shape[0] != n and B.shape[0] == 1:
        B = B.T
    if B.shape[0] != n:
        raise DimensionMismatch(f"B must have {n} rows, got {B.shape[0]}")
    return B


# Runtime


def held_state(agent: AgentState, k: int, S) -> np.ndarray:
    """
    S^(k − k_s) η(k_s) for the agent's last broadcast.

    Raises:
        ClockSkew: k precedes the last broadcast
    """
    steps = k - agent.last_broadcast_time
    if steps < 0:
        raise ClockSkew(
            f"held state requested at k={k} before the broadcast at "
            f"k={agent.last_broadcast_time}"
        )
    return np.linalg.matrix_power(as_matrix(S, "S"), steps) @ agent.last_broadcast_value


def control_input(i: int, network: NetworkState, g: CommGraph, design: SyncDesign,
                  k: int) -> np.ndarray:
    """
    u_i(k) = Γ Σ_j a_ij (η̂_j(k) − η̂_i(k)) from held states only.

    Returns:
        Input vector of length p (the column count of B)
    """
    if g.node_count != network.m:
        raise DimensionMismatch(f"graph has {g.node_count} nodes, network {network.m} agents")
    own = held_state(network.agent(i), k, design.S)
    total = np.zeros_like(own)
    for j in g.neighbors(i):
        total += g.adjacency[i, j] * (held_state(network.agent(j), k, design.S) - own)
    return design.Gamma @ total


def evaluate_trigger(agent: AgentState, k: int, params: TriggerParams, S) -> bool:
    """
    True iff agent must broadcast at k, i.e. f(k) >= 0 or k == 0.

    The caller records the broadcast (last broadcast := (η(k), k)).
    """
    if k == 0:
        return True
    eps = held_state(agent, k, S) - agent.eta
    return bool(eps @ eps >= params.threshold(k))


def network_step(network: NetworkState, g: CommGraph, design: SyncDesign,
                 noises: Sequence[float], L, params: TriggerParams,
                 force_all: bool = False,
                 reference_sum: Optional[np.ndarray] = None,
                 pin: bool = True,
                 common_input: Optional[np.ndarray] = None) -> NetworkState:
    """
    Advance every agent by one synchronous round, in place.

    The round: held states at k, inputs from held states, state update with
    noise, clock advance, then triggers evaluated on the states at k+1 with
    broadcasts recorded before the next round.

    Args:
        network: state at time k
        g: communication graph
        design: synchronization design (d x d system)
        noises: z_i(k), one per agent
        L: (m, d) noise input vectors, row i is L_i
        params: trigger thresholds
        force_all: broadcast every agent every round (full transmission)
        reference_sum: exact value of Σ_i η_i(k+1); the relative drift of the
            computed sum from it is recorded
        pin: remove the drift evenly from every agent (needs reference_sum)
        common_input: vector added to every agent's state and held state;
            used when the network is simulated relative to a moving origin

    Returns:
        The same NetworkState, now at time k+1
    """
    m, d = network.eta.shape
    z = np.asarray(noises, dtype=float).reshape(-1)
    L = np.asarray(L, dtype=float)
    if g.node_count != m or z.size != m or L.shape != (m, d) or design.S.shape != (d, d):
        raise DimensionMismatch(
            f"network {m}x{d}, graph {g.node_count} nodes, {z.size} noises, "
            f"L {L.shape}, S {design.S.shape}"
        )
    S = design.S
    Lap = laplacian(g)
    shift = np.zeros(d) if common_input is None else np.asarray(common_input, dtype=float)

    # (1) held states at k are network.held; (2) inputs from them
    coupling = -(Lap @ network.held) @ design.BGamma.T
    # (3) state update
    eta_next = network.eta @ S.T + coupling + z[:, None] * L + shift

    previous_sum = network.eta.sum(axis=0)
    new_sum = eta_next.sum(axis=0)
    expected = S @ previous_sum + L.T @ z + m * shift
    network.consistency_residuals.append(
        float(np.linalg.norm(new_sum - expected) / (1.0 + np.linalg.norm(expected)))
    )
    if reference_sum is not None:
        reference_sum = np.asarray(reference_sum, dtype=float)
        drift = new_sum - reference_sum
        network.identity_drift.append(
            float(np.linalg.norm(drift) / (1.0 + np.linalg.norm(reference_sum)))
        )
        if pin:
            eta_next -= drift / m

    # (4) clock
    network.eta = eta_next
    network.held = network.held @ S.T + shift
    network.k += 1
    k = network.k

    # (5) triggers on the states at k+1
    eps = network.held - network.eta
    eps_sq = np.einsum("ij,ij->i", eps, eps)
    threshold = params.threshold(k)
    fired = np.ones(m, dtype=bool) if force_all else eps_sq >= threshold
    if np.any(fired):
        network.held_value[fired] = network.eta[fired]
        network.held[fired] = network.eta[fired]
        network.last_broadcast[fired] = k
        network.trigger_count[fired] += 1
    network.event_log.append(
        EventRecord(k=k, triggered=fired, eps_sq=eps_sq, threshold=threshold)
    )
    return network


def trigger_violations(network: NetworkState) -> int:
    """Rounds where an agent stayed silent although ||ε||² >= threshold."""
    count = 0
    for rec in network.event_log[1:]:
        count += int(np.sum(~rec.triggered & (rec.eps_sq >= rec.threshold)))
    return count


def communication_rate(network: NetworkState) -> float:
    """Fraction of (agent, step) pairs with a broadcast, excluding k = 0."""
    fired = network.broadcasts()[1:]
    return float(fired.mean()) if fired.size else 0.0

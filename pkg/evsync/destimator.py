"""
Event-based distributed estimator.

Every sensor i runs its local filter ξ̂_i, feeds the filter output z_i into a
synchronization network over η_i ∈ ℝ^{mn} (block j of η_i is sensor i's
inference on ξ̂_j) and reads its estimate as x̆_i = m F η_i. The average of
the local estimates equals the centralized Kalman estimate at every step,
whatever the triggering pattern.

Trials can be simulated in two equivalent coordinate systems:

- ``absolute``: the algorithm exactly as the sensors run it, driven by the
  measurements y(k).
- ``error``: every state is taken relative to the quantity it tracks
  (ξ̂_j − G_j x, η_i − M x, x̂ − x) and driven by the raw noises w, v. Since
  S G_j = G_j A and Σ_j F_j G_j = I the two are algebraically identical, but
  the error form never stores x(k), which grows without bound for an unstable
  plant and would swamp the estimation errors in rounding at long horizons.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from evsync import decomp, kalman, syncctl
from evsync.core.errors import DimensionMismatch
from evsync.core.netgraph import CommGraph, LaplacianSpectrum, spectrum
from evsync.core.utils import child_seeds, mean_half_width, run_tasks, trend_slope
from evsync.decomp import Decomposition, LocalFilterState, real_part
from evsync.plantsim import (
    PlantModel,
    SensorSuite,
    Trajectory,
    seeds_for_trial,
    simulate_plant,
)
from evsync.syncctl import AgentState, NetworkState, SyncDesign, TriggerParams

logger = logging.getLogger("evsync.destimator")

MODES = ("event", "full")
COORDINATES = ("error", "absolute")


@dataclass(frozen=True, eq=False)
class EstimationSetup:
    """
    Everything a trial needs, computed once by the design pipeline.

    Attributes:
        L: (m, mn) noise input rows, L_i = e_i ⊗ ones_r
        M: (mn, n) map with Σ_i (η_i − M x) = stack_j(T (ξ̂_j − G_j x))
        F: (n, mn) real fusion matrix [F_r,1 ... F_r,m]
        G: (m, n, n) stacked G_j
    """

    model: PlantModel
    sensors: SensorSuite
    graph: CommGraph
    spectrum: LaplacianSpectrum
    dec: Decomposition
    sync: SyncDesign
    lifted: SyncDesign
    L: np.ndarray
    M: np.ndarray
    F: np.ndarray
    G: np.ndarray

    @property
    def kalman(self) -> kalman.KalmanDesign:
        return self.dec.kalman

    @property
    def m(self) -> int:
        return self.sensors.m

    @property
    def n(self) -> int:
        return self.model.n


def build_setup(model: PlantModel, sensors: SensorSuite, graph: CommGraph,
                gain_from: str = "prior", allow_complex: bool = False,
                perturb_scale: float = decomp.PERTURB_SCALE,
                max_retries: int = decomp.MAX_RETRIES, perturb_seed: int = 0,
                zeta: Optional[float] = None, B=None,
                eps: Optional[float] = None) -> EstimationSetup:
    """
    Run the design pipeline: Kalman filter, decomposition, feasibility, ζ, Γ.

    Args:
        model: plant
        sensors: sensor suite, one sensor per graph node
        graph: communication graph
        gain_from: Kalman gain convention ("prior" or "posterior")
        allow_complex: accept complex spectra of A − KCA
        perturb_scale, max_retries, perturb_seed: gain perturbation settings
        zeta: requested ζ, or None for the midpoint choice
        B: input vector of the synchronization layer, default ones
        eps: shift of the modified Riccati equation

    Returns:
        EstimationSetup
    """
    m, n = sensors.m, model.n
    if graph.node_count != m:
        raise DimensionMismatch(f"graph has {graph.node_count} nodes for {m} sensors")

    kd = kalman.design(model, sensors, gain_from=gain_from)
    dec = decomp.build(
        kd, sensors, allow_complex=allow_complex, perturb_scale=perturb_scale,
        max_retries=max_retries, seed=perturb_seed,
    )
    spec = spectrum(graph)
    z = syncctl.choose_zeta(dec.S_r, spec, zeta)
    if B is None:
        B = syncctl.default_input_matrix(dec.S_r, seed=perturb_seed)
    sync = syncctl.design_gamma(dec.S_r, B, spec, z, eps=eps)

    L = np.kron(np.eye(m), dec.ones_r.reshape(1, -1))
    TG = [real_part(dec.T @ G_j, f"T G_{j}") for j, G_j in enumerate(dec.G)]
    M = np.vstack(TG) / m
    return EstimationSetup(
        model=model,
        sensors=sensors,
        graph=graph,
        spectrum=spec,
        dec=dec,
        sync=sync,
        lifted=sync.lift(m),
        L=L,
        M=M,
        F=decomp.fusion_matrix_real(dec),
        G=np.stack(dec.G),
    )


@dataclass(frozen=True)
class SensorNode:
    """View of one sensor inside an EstimatorState."""

    index: int
    local_filter: LocalFilterState
    eta: np.ndarray
    agent: AgentState
    x_breve: np.ndarray


@dataclass
class EstimatorState:
    """
    All sensors of one trial.

    ``xi`` holds the local filter states (one row per sensor), ``network`` the
    synchronization states η_i and ``central`` the centralized estimate. In
    error coordinates they are the offsets from the tracked quantities.
    """

    xi: np.ndarray
    z: np.ndarray
    network: NetworkState
    central: np.ndarray

    @classmethod
    def initial(cls, setup: EstimationSetup, x0: Optional[np.ndarray] = None) -> "EstimatorState":
        """
        x̂(0) = 0, ξ̂_i(0) = 0, η_i(0) = 0.

        With ``x0`` given the state is expressed relative to the plant:
        ξ̂_j − G_j x0, η_i − M x0, x̂ − x0.
        """
        m, n = setup.m, setup.n
        dtype = complex if setup.dec.is_complex else float
        if x0 is None:
            xi = np.zeros((m, n), dtype=dtype)
            eta = np.zeros((m, m * n))
            central = np.zeros(n)
        else:
            x0 = np.asarray(x0, dtype=float)
            xi = -np.einsum("jab,b->ja", setup.G, x0).astype(dtype)
            eta = np.tile(-setup.M @ x0, (m, 1))
            central = -x0
        return cls(
            xi=xi,
            z=np.zeros(m),
            network=NetworkState.initial(eta),
            central=central,
        )

    @property
    def k(self) -> int:
        return self.network.k


def local_estimates(state: EstimatorState, setup: EstimationSetup) -> np.ndarray:
    """x̆_i = m F η_i for every sensor, one row each."""
    return setup.m * state.network.eta @ setup.F.T


def nodes(state: EstimatorState, setup: EstimationSetup) -> List[SensorNode]:
    x_breve = local_estimates(state, setup)
    return [
        SensorNode(
            index=i,
            local_filter=LocalFilterState(xi_hat=state.xi[i].copy(), z_last=state.z[i]),
            eta=state.network.eta[i].copy(),
            agent=state.network.agent(i),
            x_breve=x_breve[i],
        )
        for i in range(setup.m)
    ]


def step(state: EstimatorState, setup: EstimationSetup, y_next, params: TriggerParams,
         force_all: bool = False, pin: bool = True,
         forcing: Optional[np.ndarray] = None) -> EstimatorState:
    """
    One round of the distributed estimator, in place.

    (1) local filters consume y_i(k+1); (2) η_i(k+1) from the synchronization
    update driven by z_i(k); (3) x̆_i(k+1) = m F η_i(k+1) is available from
    local_estimates; (4) triggers and broadcasts at k+1.

    Args:
        state: estimator at time k
        setup: design
        y_next: y(k+1), one value per sensor (in error coordinates the
            measurement relative to the plant, C w(k) + v(k+1))
        params: trigger thresholds
        force_all: full transmission
        pin: remove the drift of Σ_i η_i from its exact value each round
        forcing: w(k) in error coordinates; None in absolute coordinates

    Returns:
        The same EstimatorState at time k+1
    """
    y_next = np.asarray(y_next, dtype=float).reshape(-1)
    if y_next.size != setup.m:
        raise DimensionMismatch(f"expected {setup.m} measurements, got {y_next.size}")

    xi_next, z = decomp.local_filter_step_all(setup.dec, state.xi, y_next)
    central = setup.kalman.A_cl @ state.central + setup.kalman.K @ y_next
    common = None
    if forcing is not None:
        w = np.asarray(forcing, dtype=float)
        xi_next = xi_next - np.einsum("jab,b->ja", setup.G, w)
        central = central - w
        common = -setup.M @ w
    z = real_part(z, "local filter output")

    reference = real_part(xi_next @ setup.dec.T.T, "modal filter states").ravel()
    syncctl.network_step(
        state.network, setup.graph, setup.lifted, z, setup.L, params,
        force_all=force_all, reference_sum=reference, pin=pin, common_input=common,
    )
    state.xi = xi_next
    state.z = z
    state.central = central
    return state


@dataclass
class RunMetrics:
    """
    Per-step traces and derived metrics of one trial.

    Squared errors are indexed by k = 0..T; identity residuals are absolute
    norms, see ``identity_scale`` for the size of the centralized estimate.
    ``cross_term[k, i]`` is (x̆_i − x̂)ᵀ(x̂ − x), whose mean vanishes when the
    centralized error is orthogonal to the data (optimal gain only).
    """

    mode: str
    sq_err: np.ndarray
    central_sq_err: np.ndarray
    broadcasts: np.ndarray
    eps_sq: np.ndarray
    thresholds: np.ndarray
    avg_identity_residual: np.ndarray
    fusion_residual: np.ndarray
    decomposition_residual: np.ndarray
    consistency_residual: np.ndarray
    cross_term: np.ndarray
    identity_scale: float
    trigger_violations: int

    @property
    def horizon(self) -> int:
        return self.sq_err.shape[0] - 1

    @property
    def steady_window(self) -> slice:
        """k > T/2."""
        return slice(self.horizon // 2 + 1, self.horizon + 1)

    @property
    def comm_rate(self) -> float:
        """Broadcast fraction over agents and k >= 1."""
        fired = self.broadcasts[1:]
        return float(fired.mean()) if fired.size else 0.0

    @property
    def steady_mse(self) -> np.ndarray:
        return self.sq_err[self.steady_window].mean(axis=0)

    @property
    def whole_mse(self) -> np.ndarray:
        return self.sq_err[1:].mean(axis=0)

    @property
    def central_steady_mse(self) -> float:
        return float(self.central_sq_err[self.steady_window].mean())

    def summary(self) -> Dict[str, Any]:
        """Scalars that the Monte Carlo aggregation needs."""
        return {
            "comm_rate": self.comm_rate,
            "steady_mse": self.steady_mse,
            "whole_mse": self.whole_mse,
            "central_steady_mse": self.central_steady_mse,
            "avg_identity": float(np.max(self.avg_identity_residual)) / (1.0 + self.identity_scale),
            "fusion_identity": float(np.max(self.fusion_residual)) / (1.0 + self.identity_scale),
            "decomposition_identity": float(np.max(self.decomposition_residual, initial=0.0)),
            "consistency": float(np.max(self.consistency_residual, initial=0.0)),
            "trigger_violations": self.trigger_violations,
            "cross_term": self.cross_term[self.steady_window].mean(axis=0),
        }


def performance_loss(event: RunMetrics, full: RunMetrics, steady: bool = True) -> float:
    """(MSE_event − MSE_full) / MSE_full on the same realization, network-averaged."""
    e = event.steady_mse if steady else event.whole_mse
    f = full.steady_mse if steady else full.whole_mse
    return float((e.mean() - f.mean()) / f.mean())


def run_trial(setup: EstimationSetup, params: TriggerParams, horizon: int, seed,
              mode: str = "event", traj: Optional[Trajectory] = None,
              coordinates: str = "error", pin: bool = True) -> Tuple[RunMetrics, EstimatorState]:
    """
    Simulate one realization of the plant and the distributed estimator.

    Args:
        setup: design
        params: trigger thresholds
        horizon: T
        seed: trial seed; ignored when ``traj`` is given
        mode: "event" or "full" (broadcast every step, same noise)
        traj: pre-generated realization, e.g. to pair event and full runs
        coordinates: "error" or "absolute"
        pin: correct the drift of Σ_i η_i each round

    Returns:
        (RunMetrics, final EstimatorState)
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if coordinates not in COORDINATES:
        raise ValueError(f"coordinates must be one of {COORDINATES}, got {coordinates!r}")
    if traj is None:
        traj = simulate_plant(setup.model, setup.sensors, horizon, seeds_for_trial(seed)["plant"])
    if traj.horizon != horizon:
        raise DimensionMismatch(f"trajectory horizon {traj.horizon} != {horizon}")

    m, n = setup.m, setup.n
    C = setup.sensors.C
    relative = coordinates == "error"
    state = EstimatorState.initial(setup, traj.states[0] if relative else None)

    sq_err = np.zeros((horizon + 1, m))
    central_sq_err = np.zeros(horizon + 1)
    avg_residual = np.zeros(horizon + 1)
    fusion_residual = np.zeros(horizon + 1)
    cross_term = np.zeros((horizon + 1, m))
    scale = 0.0

    def record(k: int) -> float:
        truth = np.zeros(n) if relative else traj.states[k]
        x_breve = local_estimates(state, setup)
        central_err = state.central - truth
        sq_err[k] = np.sum((x_breve - truth) ** 2, axis=1)
        central_sq_err[k] = central_err @ central_err
        cross_term[k] = (x_breve - state.central) @ central_err
        avg_residual[k] = np.linalg.norm(x_breve.mean(axis=0) - state.central)
        fused = decomp.fuse(setup.dec, state.xi)
        fusion_residual[k] = np.linalg.norm(fused - state.central)
        return float(np.linalg.norm(state.central))

    scale = max(scale, record(0))
    force_all = mode == "full"
    for k in range(horizon):
        if relative:
            w = traj.process_noise[k]
            y_next = C @ w + traj.measurement_noise[k + 1]
            step(state, setup, y_next, params, force_all=force_all, pin=pin, forcing=w)
        else:
            step(state, setup, traj.measurements[k + 1], params, force_all=force_all, pin=pin)
        scale = max(scale, record(k + 1))

    log = state.network.event_log
    metrics = RunMetrics(
        mode=mode,
        sq_err=sq_err,
        central_sq_err=central_sq_err,
        broadcasts=np.array([rec.triggered for rec in log]),
        eps_sq=np.array([rec.eps_sq for rec in log]),
        thresholds=np.array([rec.threshold for rec in log]),
        avg_identity_residual=avg_residual,
        fusion_residual=fusion_residual,
        decomposition_residual=np.asarray(state.network.identity_drift),
        consistency_residual=np.asarray(state.network.consistency_residuals),
        cross_term=cross_term,
        identity_scale=scale,
        trigger_violations=syncctl.trigger_violations(state.network),
    )
    return metrics, state


# Monte Carlo


def _trial_worker(args: Dict[str, Any]) -> Dict[str, Any]:
    """Module-level worker for multiprocessing; runs all modes on one realization."""
    setup: EstimationSetup = args["setup"]
    horizon = args["horizon"]
    traj = simulate_plant(
        setup.model, setup.sensors, horizon, seeds_for_trial(args["seed"])["plant"]
    )
    out: Dict[str, Any] = {"index": args["index"]}
    for mode in args["modes"]:
        metrics, _ = run_trial(
            setup, args["params"], horizon, None, mode=mode, traj=traj,
            coordinates=args["coordinates"], pin=args["pin"],
        )
        out[mode] = {"summary": metrics.summary(), "sq_err": metrics.sq_err}
        if args["keep_trace"]:
            out[mode]["metrics"] = metrics
    return out


@dataclass
class ModeAggregate:
    """Monte Carlo aggregate for one transmission mode."""

    mode: str
    trials: int
    mean_mse: np.ndarray
    steady_mse: List[Tuple[float, float]]
    whole_mse: List[Tuple[float, float]]
    network_steady_mse: Tuple[float, float]
    comm_rate: Tuple[float, float]
    trend: List[Tuple[float, float]]
    central_steady_mse: float
    max_avg_identity: float
    max_fusion_identity: float
    max_decomposition_identity: float
    max_consistency: float
    trigger_violations: int
    cross_term: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trials": self.trials,
            "steady_mse": [{"mean": m, "half_width": h} for m, h in self.steady_mse],
            "whole_mse": [{"mean": m, "half_width": h} for m, h in self.whole_mse],
            "network_steady_mse": {
                "mean": self.network_steady_mse[0],
                "half_width": self.network_steady_mse[1],
            },
            "comm_rate": {"mean": self.comm_rate[0], "half_width": self.comm_rate[1]},
            "trend_slope": [{"slope": s, "half_width": h} for s, h in self.trend],
            "central_steady_mse": self.central_steady_mse,
            "max_avg_identity_residual": self.max_avg_identity,
            "max_fusion_identity_residual": self.max_fusion_identity,
            "max_decomposition_identity_residual": self.max_decomposition_identity,
            "max_consistency_residual": self.max_consistency,
            "trigger_violations": self.trigger_violations,
            "orthogonality": [{"mean": m, "half_width": h} for m, h in self.cross_term],
        }


@dataclass
class MonteCarloResult:
    """Aggregates per mode, the paired performance loss and kept traces."""

    horizon: int
    seed: int
    params: TriggerParams
    modes: Dict[str, ModeAggregate]
    loss: Optional[Dict[str, Tuple[float, float]]] = None
    traces: List[Dict[str, RunMetrics]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "horizon": self.horizon,
            "seed": self.seed,
            "trigger": {"c0": self.params.c0, "c1": self.params.c1, "rho": self.params.rho},
            "modes": {mode: agg.to_dict() for mode, agg in self.modes.items()},
        }
        if self.loss is not None:
            out["perf_loss"] = {
                window: {"mean": m, "half_width": h} for window, (m, h) in self.loss.items()
            }
        return out


def _aggregate(mode: str, results: List[Dict[str, Any]]) -> ModeAggregate:
    summaries = [r[mode]["summary"] for r in results]
    curves = np.stack([r[mode]["sq_err"] for r in results])
    mean_mse = curves.mean(axis=0)
    horizon = mean_mse.shape[0] - 1
    window = slice(horizon // 2 + 1, horizon + 1)
    steady = np.array([s["steady_mse"] for s in summaries])
    whole = np.array([s["whole_mse"] for s in summaries])
    cross = np.array([s["cross_term"] for s in summaries])
    return ModeAggregate(
        mode=mode,
        trials=len(results),
        mean_mse=mean_mse,
        steady_mse=[mean_half_width(steady[:, i]) for i in range(steady.shape[1])],
        whole_mse=[mean_half_width(whole[:, i]) for i in range(whole.shape[1])],
        network_steady_mse=mean_half_width(steady.mean(axis=1)),
        comm_rate=mean_half_width([s["comm_rate"] for s in summaries]),
        trend=[trend_slope(mean_mse[window, i]) for i in range(mean_mse.shape[1])],
        central_steady_mse=float(np.mean([s["central_steady_mse"] for s in summaries])),
        max_avg_identity=max(s["avg_identity"] for s in summaries),
        max_fusion_identity=max(s["fusion_identity"] for s in summaries),
        max_decomposition_identity=max(s["decomposition_identity"] for s in summaries),
        max_consistency=max(s["consistency"] for s in summaries),
        trigger_violations=sum(s["trigger_violations"] for s in summaries),
        cross_term=[mean_half_width(cross[:, i]) for i in range(cross.shape[1])],
    )


def _paired_loss(results: List[Dict[str, Any]], key: str) -> Tuple[float, float]:
    """Ratio of means with a half-width from the paired differences."""
    event = np.array([r["event"]["summary"][key].mean() for r in results])
    full = np.array([r["full"]["summary"][key].mean() for r in results])
    base = float(full.mean())
    _, diff_hw = mean_half_width(event - full)
    return float((event.mean() - base) / base), diff_hw / base


def monte_carlo(setup: EstimationSetup, trials: int, horizon: int, seed: int,
                params: TriggerParams, modes: Sequence[str] = MODES, workers: int = 1,
                coordinates: str = "error", pin: bool = True,
                trace_trials: int = 0) -> MonteCarloResult:
    """
    Run ``trials`` independent realizations and aggregate them.

    Trial j uses child seed j of ``seed``; with both modes requested the event
    and full runs of a trial share one realization. Results are re-sorted by
    trial index, so they do not depend on ``workers``.

    Args:
        setup: design
        trials: number of trials (>= 1)
        horizon: T
        seed: master seed
        params: trigger thresholds
        modes: subset of ("event", "full")
        workers: worker processes; 1 runs in-process
        coordinates: "error" or "absolute"
        pin: average pinning
        trace_trials: keep full RunMetrics for the first trials

    Returns:
        MonteCarloResult
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    modes = tuple(mode for mode in MODES if mode in modes)
    if not modes:
        raise ValueError("at least one of the modes 'event' and 'full' is required")

    tasks = [
        {
            "setup": setup,
            "params": params,
            "horizon": horizon,
            "seed": trial_seed,
            "index": index,
            "modes": modes,
            "coordinates": coordinates,
            "pin": pin,
            "keep_trace": index < trace_trials,
        }
        for index, trial_seed in enumerate(child_seeds(seed, trials))
    ]

    results = run_tasks(_trial_worker, tasks, workers)

    aggregates = {mode: _aggregate(mode, results) for mode in modes}
    loss = None
    if set(modes) == set(MODES):
        loss = {
            "steady": _paired_loss(results, "steady_mse"),
            "whole": _paired_loss(results, "whole_mse"),
        }
    traces = [
        {mode: r[mode]["metrics"] for mode in modes} for r in results if "metrics" in r[modes[0]]
    ]
    return MonteCarloResult(
        horizon=horizon, seed=seed, params=params, modes=aggregates, loss=loss, traces=traces
    )


@dataclass(frozen=True)
class SweepRow:
    """Communication/accuracy pair of one trigger setting."""

    params: TriggerParams
    comm_rate: Tuple[float, float]
    loss_steady: Tuple[float, float]
    loss_whole: Tuple[float, float]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "c0": self.params.c0,
            "c1": self.params.c1,
            "rho": self.params.rho,
            "comm_rate": self.comm_rate[0],
            "comm_rate_half_width": self.comm_rate[1],
            "perf_loss": self.loss_steady[0],
            "perf_loss_half_width": self.loss_steady[1],
            "perf_loss_whole": self.loss_whole[0],
            "perf_loss_whole_half_width": self.loss_whole[1],
        }


def sweep(setup: EstimationSetup, grid: Sequence[TriggerParams], trials: int,
          horizon: int, seed: int, workers: int = 1,
          coordinates: str = "error") -> List[SweepRow]:
    """
    Paired event/full Monte Carlo for every trigger setting in ``grid``.

    Every setting sees the same realizations, so the rows are directly
    comparable.
    """
    rows = []
    for params in grid:
        result = monte_carlo(
            setup, trials, horizon, seed, params, modes=MODES, workers=workers,
            coordinates=coordinates,
        )
        rows.append(
            SweepRow(
                params=params,
                comm_rate=result.modes["event"].comm_rate,
                loss_steady=result.loss["steady"],
                loss_whole=result.loss["whole"],
            )
        )
        logger.info(
            f"sweep c0={params.c0:g} c1={params.c1:g} rho={params.rho:g}: "
            f"rate {rows[-1].comm_rate[0]:.3f}, loss {rows[-1].loss_steady[0]:.3f}"
        )
    return rows


def trace_rows(traces: List[Dict[str, RunMetrics]], mode: str = "event"):
    """Rows of the trace CSV: k, trial, sensor, mse, triggered, avg_identity_residual."""
    for trial, per_mode in enumerate(traces):
        metrics = per_mode[mode]
        for k in range(metrics.horizon + 1):
            for i in range(metrics.sq_err.shape[1]):
                yield (
                    k, trial, i, float(metrics.sq_err[k, i]), int(metrics.broadcasts[k, i]),
                    float(metrics.avg_identity_residual[k]),
                )


def event_rows(traces: List[Dict[str, RunMetrics]], mode: str = "event"):
    """Rows of the events CSV: k, trial, agent, triggered, eps_sq, threshold."""
    for trial, per_mode in enumerate(traces):
        metrics = per_mode[mode]
        for k in range(metrics.horizon + 1):
            threshold = metrics.thresholds[k]
            for i in range(metrics.broadcasts.shape[1]):
                yield (
                    k, trial, i, int(metrics.broadcasts[k, i]), float(metrics.eps_sq[k, i]),
                    "" if math.isnan(threshold) else float(threshold),
                )

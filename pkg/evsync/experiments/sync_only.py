"""Standalone event-triggered synchronization of noisy linear agents."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from evsync import syncctl
from evsync.core.experiment import Artifact, Experiment, ExperimentResult
from evsync.core.netgraph import CommGraph, LaplacianSpectrum, spectrum
from evsync.core.utils import (
    available_workers,
    child_seeds,
    format_vector,
    mean_half_width,
    percentage,
    run_tasks,
    trend_slope,
)
from evsync.experiments import EXPERIMENT_REGISTRY
from evsync.plantsim import NoiseProcess, NoiseSpec, seeds_for_trial
from evsync.syncctl import NetworkState, SyncDesign, TriggerParams

logger = logging.getLogger("evsync.experiments.sync_only")

TRANSMISSIONS = ("event", "full")
# max over the last half against its median, per agent
BOUNDED_RATIO = 1.2


@dataclass(frozen=True, eq=False)
class SyncSetup:
    """Synchronization design plus the network it runs on."""

    design: SyncDesign
    graph: CommGraph
    spectrum: LaplacianSpectrum
    L: np.ndarray
    initial: Optional[np.ndarray]
    initial_scale: float

    @property
    def m(self) -> int:
        return self.graph.node_count


def initial_states(setup: SyncSetup, seed) -> np.ndarray:
    """Configured η(0), or a seeded Gaussian draw scaled by ``initial_scale``."""
    if setup.initial is not None:
        return np.array(setup.initial, dtype=float)
    rng = np.random.default_rng(seeds_for_trial(seed)["initial"])
    return setup.initial_scale * rng.standard_normal((setup.m, setup.design.n))


def run_sync_trial(setup: SyncSetup, noise: NoiseSpec, params: TriggerParams, horizon: int,
                   seed, force_all: bool = False, pin: bool = True) -> Dict[str, Any]:
    """
    One trial of the synchronization network.

    The exact network sum m·η̄ is propagated alongside the agents and used as
    the pinning reference.

    Returns:
        Dict with the disagreement trace (mean squared distance of the agents
        to their average, k = 0..T), the same per agent, the network state
        and scalar metrics
    """
    design, L = setup.design, setup.L
    eta0 = initial_states(setup, seed)
    process = NoiseProcess(noise, setup.m, seeds_for_trial(seed)["agents"])
    network = NetworkState.initial(eta0)
    reference = eta0.sum(axis=0)

    per_agent = np.zeros((horizon + 1, setup.m))

    def record(k: int) -> None:
        centered = network.eta - network.eta.mean(axis=0)
        per_agent[k] = np.einsum("ij,ij->i", centered, centered)

    record(0)
    for k in range(horizon):
        z = process.draw(k, network.eta)
        reference = design.S @ reference + L.T @ z
        syncctl.network_step(
            network, setup.graph, design, z, L, params,
            force_all=force_all, reference_sum=reference, pin=pin,
        )
        record(k + 1)

    return {
        "disagreement": per_agent.mean(axis=1),
        "agent_disagreement": per_agent,
        "comm_rate": syncctl.communication_rate(network),
        "trigger_violations": syncctl.trigger_violations(network),
        "max_consistency": float(max(network.consistency_residuals, default=0.0)),
        "max_drift": float(max(network.identity_drift, default=0.0)),
        "network": network,
    }


def agents_bounded(per_agent: np.ndarray, ratio: float = BOUNDED_RATIO) -> List[bool]:
    """
    Per-agent boundedness of a trial-averaged disagreement curve.

    An agent passes when the maximum over the last half of the horizon is at
    most ``ratio`` times the median over that window.
    """
    horizon = per_agent.shape[0] - 1
    window = per_agent[horizon // 2 + 1:]
    return [bool(np.max(col) <= ratio * np.median(col)) for col in window.T]


def _sync_worker(args: Dict[str, Any]) -> Dict[str, Any]:
    """Module-level worker: every transmission mode on one seed."""
    out: Dict[str, Any] = {"index": args["index"]}
    for transmission in TRANSMISSIONS:
        trial = run_sync_trial(
            args["setup"], args["noise"], args["params"], args["horizon"], args["seed"],
            force_all=transmission == "full", pin=args["pin"],
        )
        del trial["network"]
        out[transmission] = trial
    return out


class SyncOnlyExperiment(Experiment):
    """Synchronize m agents with dynamics S under each configured noise kind."""

    def __init__(self, config):
        super().__init__(config)
        self.curves: Dict[str, Dict[str, np.ndarray]] = {}

    @property
    def name(self) -> str:
        return "sync-only"

    @property
    def description(self) -> str:
        return "Event-triggered mean-square synchronization of noisy linear agents"

    def check_prerequisites(self) -> List[str]:
        problems = []
        if not self.config.sync_only:
            problems.append("sync-only experiments need mode sync-only")
        if self.config.sync.S is None:
            problems.append("sync-only experiments need sync.S")
        return problems

    def design(self) -> SyncSetup:
        cfg = self.config
        S = np.array(cfg.sync.S, dtype=float)
        graph = cfg.comm_graph()
        spec = spectrum(graph)
        m, d = graph.node_count, S.shape[0]
        zeta = syncctl.choose_zeta(S, spec, cfg.sync.zeta)
        if cfg.sync.B is None:
            B = syncctl.default_input_matrix(S, seed=cfg.decomposition.perturb_seed)
        else:
            B = np.array(cfg.sync.B, dtype=float).reshape(-1, 1)
        design = syncctl.design_gamma(S, B, spec, zeta, eps=cfg.sync.eps)

        if cfg.sync.L is None:
            L = np.ones((m, d))
        else:
            L = np.array(cfg.sync.L, dtype=float)
            if L.shape[0] == 1:
                L = np.tile(L, (m, 1))
        return SyncSetup(
            design=design,
            graph=graph,
            spectrum=spec,
            L=L,
            initial=None if cfg.sync.initial is None else np.array(cfg.sync.initial),
            initial_scale=float(cfg.sync.initial_scale),
        )

    def describe(self, setup: SyncSetup) -> Dict[str, Any]:
        design = setup.design
        return {
            "graph": {"laplacian_spectrum": list(setup.spectrum.mu)},
            "certificate": design.certificate.to_dict(),
            "sync": {
                "zeta": design.zeta,
                "B": [float(x) for x in design.B.ravel()],
                "Gamma": [float(x) for x in design.Gamma.ravel()],
                "riccati_margin": design.margin,
                "eps": design.eps,
                "closed_loop_radii": [
                    {"mu": mu, "radius": radius}
                    for mu, radius in syncctl.closed_loop_radii(design, setup.spectrum)
                ],
            },
        }

    def simulate(self, setup: SyncSetup) -> Dict[str, Any]:
        cfg = self.config
        exp = cfg.experiment
        params = cfg.trigger_params()
        workers = exp.workers or available_workers()
        seeds = child_seeds(exp.seed, len(cfg.noise))
        summary: Dict[str, Any] = {}
        for spec, noise_seed in zip(cfg.noise, seeds):
            logger.info(f"Synchronizing under {spec.kind} noise ({exp.trials} trials)")
            tasks = [
                {
                    "setup": setup,
                    "noise": spec,
                    "params": params,
                    "horizon": exp.horizon,
                    "seed": trial_seed,
                    "index": index,
                    "pin": cfg.sync.pin_average,
                }
                for index, trial_seed in enumerate(child_seeds(noise_seed, exp.trials))
            ]
            results = run_tasks(_sync_worker, tasks, workers)
            per_mode = {}
            self.curves[spec.kind] = {}
            for transmission in TRANSMISSIONS:
                trials = [r[transmission] for r in results]
                curve = np.mean([t["disagreement"] for t in trials], axis=0)
                self.curves[spec.kind][transmission] = curve
                per_mode[transmission] = self._aggregate(curve, trials)
            summary[spec.kind] = per_mode
        return summary

    @staticmethod
    def _aggregate(curve: np.ndarray, trials: List[Dict[str, Any]]) -> Dict[str, Any]:
        horizon = curve.shape[0] - 1
        window = slice(horizon // 2 + 1, horizon + 1)
        steady = [float(np.mean(t["disagreement"][window])) for t in trials]
        mean, half_width = mean_half_width(steady)
        slope, slope_hw = trend_slope(curve[window])
        rate, rate_hw = mean_half_width([t["comm_rate"] for t in trials])
        per_agent = np.mean([t["agent_disagreement"] for t in trials], axis=0)
        return {
            "steady_disagreement": {"mean": mean, "half_width": half_width},
            "trend_slope": {"slope": slope, "half_width": slope_hw},
            "bounded": bool(slope <= slope_hw),
            "agents_bounded": agents_bounded(per_agent),
            "comm_rate": {"mean": rate, "half_width": rate_hw},
            "max_consistency_residual": max(t["max_consistency"] for t in trials),
            "max_drift": max(t["max_drift"] for t in trials),
            "trigger_violations": sum(t["trigger_violations"] for t in trials),
        }

    def artifacts(self, result: ExperimentResult) -> List[Artifact]:
        artifacts = super().artifacts(result)
        curves = self.curves

        def rows():
            for kind in sorted(curves):
                for transmission in TRANSMISSIONS:
                    curve = curves[kind][transmission]
                    for k in range(curve.shape[0]):
                        yield kind, transmission, k, float(curve[k])

        if curves:
            artifacts.append(
                Artifact(
                    "disagreement.csv",
                    header=("noise", "transmission", "k", "mean_disagreement"),
                    rows=rows,
                )
            )
        return artifacts

    def report(self, result: ExperimentResult) -> List[str]:
        cert = result.design["certificate"]
        threshold = "inf" if cert["threshold"] is None else f"{cert['threshold']:.4g}"
        lines = [
            f"Experiment: {self.config.name} ({self.name})",
            f"Feasibility: Mahler {cert['mahler']:.4g} < threshold {threshold}, "
            f"zeta = {cert['zeta']:.4g}",
            f"Gamma: {format_vector(result.design['sync']['Gamma'])}",
        ]
        for kind, per_mode in result.summary.items():
            event, full = per_mode["event"], per_mode["full"]
            lines.append(
                f"[{kind}] comm rate {percentage(event['comm_rate']['mean'])}, "
                f"steady disagreement {event['steady_disagreement']['mean']:.4g} "
                f"(full {full['steady_disagreement']['mean']:.4g}), "
                f"consistency residual {event['max_consistency_residual']:.2g}, "
                f"{'bounded' if event['bounded'] else 'GROWING'}"
            )
        return lines


# Register this experiment
EXPERIMENT_REGISTRY["sync-only"] = SyncOnlyExperiment

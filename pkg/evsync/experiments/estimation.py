"""Event-based distributed Kalman filtering over a sensor network."""

import logging
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from evsync import destimator, syncctl
from evsync.core.experiment import Artifact, Experiment, ExperimentResult, write_artifacts
from evsync.core.matops import eigvals
from evsync.core.utils import available_workers, format_vector, percentage
from evsync.destimator import EstimationSetup, MonteCarloResult
from evsync.experiments import EXPERIMENT_REGISTRY
from evsync.syncctl import TriggerParams

logger = logging.getLogger("evsync.experiments.estimation")

# steady MSE must stay below this multiple of trace(P)
BOUNDED_FACTOR = 10.0

MODES_FOR = {"event": ("event",), "full": ("full",), "both": ("event", "full")}


def _floats(values) -> List[float]:
    return [float(x) for x in np.real_if_close(np.ravel(values))]


def _eigen_list(values) -> List[Any]:
    out = []
    for x in np.ravel(values):
        if abs(np.imag(x)) > 0:
            out.append([float(np.real(x)), float(np.imag(x))])
        else:
            out.append(float(np.real(x)))
    return out


class EstimationExperiment(Experiment):
    """Design the distributed estimator and run its Monte Carlo evaluation."""

    def __init__(self, config):
        super().__init__(config)
        self.monte_carlo: Optional[MonteCarloResult] = None
        self.setup: Optional[EstimationSetup] = None

    @property
    def name(self) -> str:
        return "estimation"

    @property
    def description(self) -> str:
        return "Event-based distributed Kalman filter with exact average fusion"

    def check_prerequisites(self) -> List[str]:
        problems = []
        if self.config.sync_only:
            problems.append("estimation experiments need mode event, full or both")
        if self.config.plant is None or self.config.sensors is None:
            problems.append("estimation experiments need a plant and sensors")
        return problems

    def design(self) -> EstimationSetup:
        cfg = self.config
        dec = cfg.decomposition
        B = None if cfg.sync.B is None else np.array(cfg.sync.B, dtype=float).reshape(-1, 1)
        self.setup = destimator.build_setup(
            cfg.plant_model(),
            cfg.sensor_suite(),
            cfg.comm_graph(),
            gain_from=cfg.kalman.gain_from,
            allow_complex=dec.allow_complex,
            perturb_scale=dec.perturb_scale,
            max_retries=dec.max_retries,
            perturb_seed=dec.perturb_seed,
            zeta=cfg.sync.zeta,
            B=B,
            eps=cfg.sync.eps,
        )
        return self.setup

    def describe(self, setup: EstimationSetup) -> Dict[str, Any]:
        kd, dec, sync = setup.kalman, setup.dec, setup.sync
        return {
            "kalman": {
                "gain_from": kd.gain_from,
                "K": [_floats(row) for row in kd.K],
                "trace_P": float(np.trace(kd.P)),
                "trace_error_cov": float(np.trace(kd.error_cov)),
            },
            "decomposition": {
                "eigenvalues": _eigen_list(dec.lam),
                "beta": _eigen_list(dec.beta),
                "spectrum_S": _eigen_list(eigvals(dec.S)),
                "complex": bool(dec.is_complex),
                "perturbations": dec.retries,
                "beta_residual": dec.beta_residual(),
                "sylvester_residual": dec.sylvester_residual(),
            },
            "graph": {"laplacian_spectrum": list(setup.spectrum.mu)},
            "certificate": sync.certificate.to_dict(),
            "sync": {
                "zeta": sync.zeta,
                "B": _floats(sync.B),
                "Gamma": _floats(sync.Gamma),
                "riccati_margin": sync.margin,
                "eps": sync.eps,
                "closed_loop_radii": [
                    {"mu": mu, "radius": radius}
                    for mu, radius in syncctl.closed_loop_radii(sync, setup.spectrum)
                ],
            },
        }

    def simulate(self, setup: EstimationSetup) -> Dict[str, Any]:
        cfg = self.config
        exp = cfg.experiment
        workers = exp.workers or available_workers()
        logger.info(
            f"Monte Carlo: {exp.trials} trials, horizon {exp.horizon}, "
            f"modes {MODES_FOR[cfg.mode]}, {workers} worker(s)"
        )
        self.monte_carlo = destimator.monte_carlo(
            setup,
            exp.trials,
            exp.horizon,
            exp.seed,
            cfg.trigger_params(),
            modes=MODES_FOR[cfg.mode],
            workers=workers,
            coordinates=exp.coordinates,
            pin=cfg.sync.pin_average,
            trace_trials=min(cfg.output.trace_trials, exp.trials),
        )
        summary = self.monte_carlo.to_dict()
        summary["stability"] = self.stability(setup, self.monte_carlo)
        return summary

    def stability(self, setup: EstimationSetup, result: MonteCarloResult) -> Dict[str, Any]:
        """
        Bounded-error check per mode and sensor.

        A sensor is bounded when its steady MSE stays below BOUNDED_FACTOR ·
        trace(P) and the fitted slope of its mean MSE curve over the steady
        window is not significantly positive.
        """
        limit = BOUNDED_FACTOR * float(np.trace(setup.kalman.P))
        out = {}
        for mode, agg in result.modes.items():
            sensors = []
            for (mse, _), (slope, half_width) in zip(agg.steady_mse, agg.trend):
                sensors.append(mse < limit and slope <= half_width)
            out[mode] = {"limit": limit, "bounded": sensors, "all_bounded": all(sensors)}
        return out

    def artifacts(self, result: ExperimentResult) -> List[Artifact]:
        artifacts = super().artifacts(result)
        mc = self.monte_carlo
        if mc is None:
            return artifacts
        mode = "event" if "event" in mc.modes else "full"
        traces = mc.traces
        means = {name: agg.mean_mse for name, agg in mc.modes.items()}

        def mean_rows():
            curve = means[mode]
            for k in range(curve.shape[0]):
                for i in range(curve.shape[1]):
                    yield k, i, float(curve[k, i])

        artifacts += [
            Artifact(
                "trace.csv",
                header=("k", "trial", "sensor", "mse", "triggered", "avg_identity_residual"),
                rows=lambda: destimator.trace_rows(traces, mode),
            ),
            Artifact("mean_mse.csv", header=("k", "sensor", "mean_mse"), rows=mean_rows),
            Artifact(
                "events.csv",
                header=("k", "trial", "agent", "triggered", "eps_sq", "threshold"),
                rows=lambda: destimator.event_rows(traces, mode),
            ),
        ]
        return artifacts

    def report(self, result: ExperimentResult) -> List[str]:
        design = result.design
        cert = design["certificate"]
        threshold = "inf" if cert["threshold"] is None else f"{cert['threshold']:.4g}"
        lines = [
            f"Experiment: {self.config.name} ({self.name})",
            f"Feasibility: Mahler {cert['mahler']:.4g} < threshold {threshold} "
            f"(mu2 = {cert['mu2']:.4g}, mum = {cert['mu_max']:.4g}), zeta = {cert['zeta']:.4g}",
            f"Gamma: {format_vector(design['sync']['Gamma'])}",
            f"trace(P) = {design['kalman']['trace_P']:.4g}, "
            f"steady-state filter error trace = {design['kalman']['trace_error_cov']:.4g}",
        ]
        if not result.summary:
            return lines
        for mode, agg in result.summary["modes"].items():
            mse = ", ".join(f"{s['mean']:.4g}±{s['half_width']:.2g}" for s in agg["steady_mse"])
            lines.append(
                f"[{mode}] comm rate {percentage(agg['comm_rate']['mean'])}, "
                f"steady MSE per sensor: {mse}"
            )
            lines.append(
                f"[{mode}] max identity residual {agg['max_avg_identity_residual']:.2g}, "
                f"trigger violations {agg['trigger_violations']}"
            )
        loss = result.summary.get("perf_loss")
        if loss:
            lines.append(
                f"Performance loss: {percentage(loss['steady']['mean'])} steady window, "
                f"{percentage(loss['whole']['mean'])} whole horizon"
            )
        return lines

    def sweep(self, grid: Sequence[TriggerParams], out_dir: Optional[str] = None) -> List[Dict]:
        """
        Run the communication/accuracy sweep on the design of this config.

        Returns:
            One dict per trigger setting; written to sweep.csv and sweep.json
            when ``out_dir`` is given
        """
        setup = self.setup if self.setup is not None else self.design()
        exp = self.config.experiment
        rows = destimator.sweep(
            setup, grid, exp.trials, exp.horizon, exp.seed,
            workers=exp.workers or available_workers(), coordinates=exp.coordinates,
        )
        table = [row.to_dict() for row in rows]
        if out_dir is not None:
            header = list(table[0]) if table else []
            write_artifacts(out_dir, [
                Artifact(
                    "sweep.json",
                    payload={"config": self.config.to_dict(runtime=False), "sweep": table},
                ),
                Artifact("sweep.csv", header=header,
                         rows=lambda: ([row[key] for key in header] for row in table)),
            ])
        return table


# Register this experiment
EXPERIMENT_REGISTRY["estimation"] = EstimationExperiment

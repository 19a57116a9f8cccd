"""
Run configuration.

A run is described by one JSON document with explicit matrices as nested
arrays. ``load_config`` and ``load_preset`` parse it into an immutable
RunConfig after checking every precondition the design pipeline relies on;
all problems are reported together in one ValidationError.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from importlib import resources
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from evsync.core.errors import (
    EvsyncError,
    GraphError,
    InvalidSpec,
    ParseError,
    ValidationError,
)
from evsync.core.matops import is_controllable, is_observable, mahler_measure
from evsync.core.netgraph import (
    GRAPH_GENERATORS,
    CommGraph,
    feasibility_threshold,
    from_edges,
    spectrum,
)
from evsync.destimator import COORDINATES
from evsync.kalman import GAIN_CONVENTIONS
from evsync.plantsim import NoiseSpec, PlantModel, SensorSuite
from evsync.syncctl import TriggerParams, trigger_problems

logger = logging.getLogger("evsync.config")

MODES = ("event", "full", "both", "sync-only")

Matrix = Tuple[Tuple[float, ...], ...]


@dataclass(frozen=True)
class PlantConfig:
    A: Matrix
    Q: Matrix
    x0_cov: Optional[Matrix] = None


@dataclass(frozen=True)
class SensorConfig:
    C: Matrix
    R: Matrix


@dataclass(frozen=True)
class KalmanConfig:
    gain_from: str = "prior"


@dataclass(frozen=True)
class DecompositionConfig:
    allow_complex: bool = False
    perturb_scale: float = 1e-6
    max_retries: int = 20
    perturb_seed: int = 0


@dataclass(frozen=True)
class GraphConfig:
    """Either a generator ``kind`` with ``nodes``, or ``kind = "edges"`` with an edge list."""

    kind: str = "ring"
    nodes: Optional[int] = None
    edges: Optional[Tuple[Tuple[float, ...], ...]] = None


@dataclass(frozen=True)
class SyncConfig:
    """
    Synchronization layer settings.

    ``S``, ``L``, ``initial`` and ``initial_scale`` are used by sync-only runs;
    estimation runs take S from the decomposition.
    """

    zeta: Optional[float] = None
    B: Optional[Matrix] = None
    eps: Optional[float] = None
    pin_average: bool = True
    S: Optional[Matrix] = None
    L: Optional[Matrix] = None
    initial: Optional[Matrix] = None
    initial_scale: float = 1.0


@dataclass(frozen=True)
class TriggerConfig:
    c0: float = 0.1
    c1: float = 1.0
    rho: float = 0.95


@dataclass(frozen=True)
class ExperimentConfig:
    """``workers = None`` uses every available CPU."""

    trials: int = 100
    horizon: int = 400
    seed: int = 0
    workers: Optional[int] = None
    coordinates: str = "error"


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "results"
    trace_trials: int = 10


@dataclass(frozen=True)
class RunConfig:
    """A complete, validated run description."""

    name: str
    mode: str
    graph: GraphConfig
    plant: Optional[PlantConfig] = None
    sensors: Optional[SensorConfig] = None
    kalman: KalmanConfig = field(default_factory=KalmanConfig)
    decomposition: DecompositionConfig = field(default_factory=DecompositionConfig)
    sync: SyncConfig = field(default_factory=SyncConfig)
    trigger: TriggerConfig = field(default_factory=TriggerConfig)
    noise: Tuple[NoiseSpec, ...] = ()
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    @property
    def sync_only(self) -> bool:
        return self.mode == "sync-only"

    @property
    def agent_count(self) -> int:
        """Number of graph nodes: sensors in estimation runs, agents in sync-only runs."""
        if self.graph.nodes is not None:
            return self.graph.nodes
        if not self.sync_only and self.sensors is not None:
            return len(self.sensors.C)
        if self.sync.initial is not None:
            return len(self.sync.initial)
        if self.sync.L is not None and len(self.sync.L) > 1:
            return len(self.sync.L)
        raise ValidationError(["graph.nodes is required to size the network"])

    def plant_model(self) -> PlantModel:
        A = np.array(self.plant.A, dtype=float)
        x0_cov = self.plant.x0_cov if self.plant.x0_cov is not None else np.eye(A.shape[0])
        return PlantModel(A=A, Q=np.array(self.plant.Q, dtype=float),
                          x0_cov=np.array(x0_cov, dtype=float))

    def sensor_suite(self) -> SensorSuite:
        return SensorSuite(C=np.array(self.sensors.C, dtype=float),
                           R=np.array(self.sensors.R, dtype=float))

    def comm_graph(self) -> CommGraph:
        return build_graph(self.graph, self.agent_count)

    def trigger_params(self) -> TriggerParams:
        return TriggerParams(c0=self.trigger.c0, c1=self.trigger.c1, rho=self.trigger.rho)

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        """
        Apply CLI overrides and re-validate.

        Accepted keys: trials, horizon, seed, workers, mode, out, allow_complex.
        None values are ignored.
        """
        experiment, output, decomposition, mode = (
            self.experiment, self.output, self.decomposition, self.mode
        )
        for key, value in overrides.items():
            if value is None:
                continue
            if key in ("trials", "horizon", "seed", "workers"):
                experiment = replace(experiment, **{key: value})
            elif key == "out":
                output = replace(output, dir=str(value))
            elif key == "allow_complex":
                decomposition = replace(decomposition, allow_complex=bool(value))
            elif key == "mode":
                mode = value
            else:
                raise ValueError(f"unknown override '{key}'")
        config = replace(
            self, experiment=experiment, output=output, decomposition=decomposition, mode=mode
        )
        problems = validate(config)
        if problems:
            raise ValidationError(problems)
        return config

    def to_dict(self, runtime: bool = True) -> Dict[str, Any]:
        """
        Canonical JSON-ready echo; from_dict(to_dict()) == self.

        With ``runtime=False`` the settings that cannot change any result
        (worker count, output directory) are left out, so the echo embedded
        in summary.json is the same for every way of running one config.
        """
        out: Dict[str, Any] = {"name": self.name, "mode": self.mode}
        for f in fields(self):
            if f.name in ("name", "mode"):
                continue
            value = getattr(self, f.name)
            if f.name == "noise":
                out["noise"] = [spec.to_dict() for spec in value]
            elif value is not None:
                out[f.name] = _plain(asdict(value))
        if not runtime:
            del out["experiment"]["workers"]
            del out["output"]["dir"]
        return out

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        """
        Parse and validate a config document.

        Raises:
            ValidationError: listing every problem found
        """
        problems: List[str] = []
        config = _parse(data, problems)
        if config is not None and not problems:
            problems.extend(validate(config))
        if problems:
            raise ValidationError(problems)
        return config


def load_config(path: str) -> RunConfig:
    """
    Load and validate a JSON config file.

    Raises:
        ParseError: the file cannot be read or is not valid JSON
        ValidationError: the document violates one or more preconditions
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ParseError(f"cannot read config {path}: {e}")
    except json.JSONDecodeError as e:
        raise ParseError(f"{path} is not valid JSON: {e}")
    config = RunConfig.from_dict(data)
    logger.info(f"Loaded config '{config.name}' from {path}")
    return config


# older names that still resolve to a bundled preset
PRESET_ALIASES = {"paper_sec5": "four_sensor_ring"}


def preset_names() -> List[str]:
    return sorted(
        entry.name[: -len(".json")]
        for entry in resources.files("evsync.presets").iterdir()
        if entry.name.endswith(".json")
    )


def load_preset(name: str) -> RunConfig:
    """Load one of the bundled presets (see preset_names) or an alias of one."""
    name = PRESET_ALIASES.get(name, name)
    resource = resources.files("evsync.presets") / f"{name}.json"
    if not resource.is_file():
        raise ParseError(f"unknown preset '{name}'; available: {', '.join(preset_names())}")
    try:
        data = json.loads(resource.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"preset {name} is not valid JSON: {e}")
    return RunConfig.from_dict(data)


def build_graph(graph: GraphConfig, nodes: int) -> CommGraph:
    if graph.kind == "edges":
        return from_edges(nodes, graph.edges or ())
    return GRAPH_GENERATORS[graph.kind](nodes)


# Parsing

_SECTIONS = {
    "plant": (PlantConfig, {"A", "Q", "x0_cov"}),
    "sensors": (SensorConfig, {"C", "R"}),
    "kalman": (KalmanConfig, set()),
    "decomposition": (DecompositionConfig, set()),
    "graph": (GraphConfig, set()),
    "sync": (SyncConfig, {"B", "S", "L", "initial"}),
    "trigger": (TriggerConfig, set()),
    "experiment": (ExperimentConfig, set()),
    "output": (OutputConfig, set()),
}

_TOP_LEVEL = {"name", "mode", "noise"} | set(_SECTIONS)


def _parse(data: Any, problems: List[str]) -> Optional[RunConfig]:
    if not isinstance(data, dict):
        problems.append("config must be a JSON object")
        return None
    _unknown_keys(data, _TOP_LEVEL, "config", problems)

    name = data.get("name", "unnamed")
    if not isinstance(name, str):
        problems.append(f"name must be a string, got {name!r}")
    mode = data.get("mode", "both")
    if mode not in MODES:
        problems.append(f"mode must be one of {', '.join(MODES)}, got {mode!r}")

    sections: Dict[str, Any] = {}
    for key, (section_cls, matrix_keys) in _SECTIONS.items():
        if key not in data:
            continue
        sections[key] = _parse_section(data[key], key, section_cls, matrix_keys, problems)
    if "graph" not in data:
        problems.append("graph is required (a connected communication graph)")

    noise: List[NoiseSpec] = []
    raw_noise = data.get("noise", [])
    if isinstance(raw_noise, dict):
        raw_noise = [raw_noise]
    if not isinstance(raw_noise, list):
        problems.append("noise must be a list of {kind, ...parameters} objects")
        raw_noise = []
    for index, entry in enumerate(raw_noise):
        if not isinstance(entry, dict) or "kind" not in entry:
            problems.append(f"noise[{index}] must be an object with a 'kind'")
            continue
        params = {k: v for k, v in entry.items() if k != "kind"}
        noise.append(NoiseSpec(kind=entry["kind"], params=params))

    if problems or any(v is None for v in sections.values()):
        return None
    return RunConfig(name=name, mode=mode, noise=tuple(noise), **sections)


def _parse_section(raw: Any, key: str, section_cls, matrix_keys, problems: List[str]):
    if not isinstance(raw, dict):
        problems.append(f"{key} must be an object")
        return None
    allowed = {f.name for f in fields(section_cls)}
    _unknown_keys(raw, allowed, key, problems)
    values = {}
    for name in allowed & set(raw):
        value = raw[name]
        if name in matrix_keys and value is not None:
            value = _matrix(value, f"{key}.{name}", problems)
        elif name == "edges" and value is not None:
            value = _edges(value, problems)
        values[name] = value
    try:
        return section_cls(**values)
    except TypeError as e:
        problems.append(f"{key}: {e}")
        return None


def _unknown_keys(data: Dict[str, Any], allowed, where: str, problems: List[str]) -> None:
    for key in sorted(set(data) - set(allowed)):
        problems.append(f"unknown key '{key}' in {where}")


def _matrix(value: Any, where: str, problems: List[str]) -> Optional[Matrix]:
    """Nested lists to a tuple of rows; a scalar is 1x1 and a flat list one row."""
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        problems.append(f"{where} must be a number or a (nested) list of numbers")
        return None
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.size == 0:
        problems.append(f"{where} must be a non-empty matrix, got shape {arr.shape}")
        return None
    if not np.all(np.isfinite(arr)):
        problems.append(f"{where} has non-finite entries")
        return None
    return tuple(tuple(float(x) for x in row) for row in arr)


def _edges(value: Any, problems: List[str]) -> Optional[Tuple[Tuple[float, ...], ...]]:
    if not isinstance(value, list) or not all(
        isinstance(e, list) and len(e) in (2, 3) for e in value
    ):
        problems.append("graph.edges must be a list of [i, j] or [i, j, weight] entries")
        return None
    return tuple(tuple(e) for e in value)


def _plain(value: Any) -> Any:
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


# Validation


def validate(config: RunConfig) -> List[str]:
    """Every precondition violation of a parsed config, as readable messages."""
    problems: List[str] = []
    _validate_scalars(config, problems)

    nodes = None
    try:
        nodes = config.agent_count
    except ValidationError as e:
        problems.extend(e.problems)

    graph_spec = None
    if config.graph.kind != "edges" and config.graph.kind not in GRAPH_GENERATORS:
        problems.append(
            f"graph.kind must be 'edges' or one of {', '.join(sorted(GRAPH_GENERATORS))}, "
            f"got {config.graph.kind!r}"
        )
    elif config.graph.kind == "edges" and not config.graph.edges and (nodes or 0) > 1:
        problems.append("graph.edges is required for graph.kind 'edges'")
    elif nodes is not None:
        if nodes < 1:
            problems.append(f"graph needs at least one node, got {nodes}")
        else:
            try:
                graph_spec = spectrum(build_graph(config.graph, nodes))
            except GraphError as e:
                problems.append(f"communication graph must be connected and valid: {e}")

    if config.sync_only:
        S = _validate_sync_only(config, nodes, problems)
    else:
        S = _validate_estimation(config, nodes, problems)

    if S is not None and graph_spec is not None:
        _validate_feasibility(config, S, graph_spec, problems)

    for index, spec in enumerate(config.noise):
        try:
            spec.build(max(nodes or 1, 1))
        except InvalidSpec as e:
            problems.append(f"noise[{index}]: {e}")
        except (TypeError, ValueError) as e:
            problems.append(f"noise[{index}] ({spec.kind}): {e}")
    if config.sync_only and not config.noise:
        problems.append("sync-only runs need at least one noise entry")
    return problems


def _validate_scalars(config: RunConfig, problems: List[str]) -> None:
    if config.kalman.gain_from not in GAIN_CONVENTIONS:
        problems.append(
            f"kalman.gain_from must be one of {GAIN_CONVENTIONS}, got {config.kalman.gain_from!r}"
        )
    dec = config.decomposition
    for where, flag in (("decomposition.allow_complex", dec.allow_complex),
                        ("sync.pin_average", config.sync.pin_average)):
        if not isinstance(flag, bool):
            problems.append(f"{where} must be true or false, got {flag!r}")
    if not (isinstance(dec.perturb_scale, (int, float)) and dec.perturb_scale > 0):
        problems.append(f"decomposition.perturb_scale must be positive, got {dec.perturb_scale!r}")
    if not (isinstance(dec.max_retries, int) and dec.max_retries >= 0):
        problems.append(f"decomposition.max_retries must be a count >= 0, got {dec.max_retries!r}")
    problems.extend(trigger_problems(config.trigger.c0, config.trigger.c1, config.trigger.rho))

    exp = config.experiment
    if not (isinstance(exp.trials, int) and exp.trials >= 1):
        problems.append(f"experiment.trials must be an integer >= 1, got {exp.trials!r}")
    if not (isinstance(exp.horizon, int) and exp.horizon >= 1):
        problems.append(f"experiment.horizon must be an integer >= 1, got {exp.horizon!r}")
    if not (isinstance(exp.seed, int) and exp.seed >= 0):
        problems.append(f"experiment.seed must be a non-negative integer, got {exp.seed!r}")
    if exp.workers is not None and not (isinstance(exp.workers, int) and exp.workers >= 1):
        problems.append(f"experiment.workers must be an integer >= 1, got {exp.workers!r}")
    if exp.coordinates not in COORDINATES:
        problems.append(
            f"experiment.coordinates must be one of {COORDINATES}, got {exp.coordinates!r}"
        )
    if not (isinstance(config.output.trace_trials, int) and config.output.trace_trials >= 0):
        problems.append(
            f"output.trace_trials must be an integer >= 0, got {config.output.trace_trials!r}"
        )

    sync = config.sync
    if sync.zeta is not None and not (
        isinstance(sync.zeta, (int, float)) and 0 < sync.zeta <= 1
    ):
        problems.append(f"sync.zeta must lie in (0, 1], got {sync.zeta!r}")
    if sync.eps is not None and not (isinstance(sync.eps, (int, float)) and sync.eps > 0):
        problems.append(f"sync.eps must be positive, got {sync.eps!r}")


def _validate_estimation(config: RunConfig, nodes: Optional[int],
                         problems: List[str]) -> Optional[np.ndarray]:
    if config.plant is None:
        problems.append("plant is required for estimation runs")
    if config.sensors is None:
        problems.append("sensors are required for estimation runs")
    if config.plant is None or config.sensors is None:
        return None
    try:
        model = config.plant_model()
        sensors = config.sensor_suite()
    except EvsyncError as e:
        problems.append(f"plant/sensors: {e}")
        return None
    if sensors.n != model.n:
        problems.append(f"sensors.C has {sensors.n} columns but the plant has {model.n} states")
        return None
    if nodes is not None and nodes != sensors.m:
        problems.append(f"graph has {nodes} nodes but there are {sensors.m} sensors")
    if not is_observable(model.A, sensors.C):
        problems.append("(A, C) must be jointly observable")
    if config.sync.B is not None and np.array(config.sync.B).size != model.n:
        problems.append(f"sync.B must have {model.n} entries")
    # S = Λ + 1βᵀ has the spectrum of A
    return model.A


def _validate_sync_only(config: RunConfig, nodes: Optional[int],
                        problems: List[str]) -> Optional[np.ndarray]:
    sync = config.sync
    if sync.S is None:
        problems.append("sync.S is required for sync-only runs")
        return None
    S = np.array(sync.S, dtype=float)
    if S.shape[0] != S.shape[1]:
        problems.append(f"sync.S must be square, got shape {S.shape}")
        return None
    d = S.shape[0]
    if sync.L is not None:
        L = np.array(sync.L, dtype=float)
        if L.shape[1] != d or L.shape[0] not in (1, nodes):
            problems.append(f"sync.L must be one row of length {d} or one row per agent")
    if sync.initial is not None:
        init = np.array(sync.initial, dtype=float)
        if nodes is not None and init.shape != (nodes, d):
            problems.append(f"sync.initial must be {nodes}x{d}, got shape {init.shape}")
    if not (isinstance(sync.initial_scale, (int, float)) and sync.initial_scale >= 0):
        problems.append(f"sync.initial_scale must be >= 0, got {sync.initial_scale!r}")
    if sync.B is not None:
        B = np.array(sync.B, dtype=float).reshape(-1, 1)
        if B.shape[0] != d:
            problems.append(f"sync.B must have {d} entries")
        elif not is_controllable(S, B):
            problems.append("(S, B) must be controllable")
    return S


def _validate_feasibility(config: RunConfig, S: np.ndarray, graph_spec, problems: List[str]):
    mahler = mahler_measure(S)
    threshold = feasibility_threshold(graph_spec)
    if not mahler < threshold:
        problems.append(
            f"synchronization is infeasible: Mahler measure {mahler:.6g} is not below the "
            f"threshold (1+mu2/mum)/(1-mu2/mum) = {threshold:.6g} "
            f"(mu2 = {graph_spec.mu2:.6g}, mum = {graph_spec.mu_max:.6g})"
        )
        return
    zeta = config.sync.zeta
    if zeta is not None and 0 < zeta <= 1:
        if not mahler < 1.0 / zeta:
            problems.append(
                f"sync.zeta = {zeta:g} violates Mahler(S) = {mahler:.6g} < 1/zeta"
            )
        if not 1.0 / zeta <= threshold:
            problems.append(
                f"sync.zeta = {zeta:g} violates 1/zeta <= threshold = "
                f"{'inf' if math.isinf(threshold) else format(threshold, '.6g')}"
            )

"""
Plant, sensor and agent-noise simulation.

The monitored plant is x(k+1) = A x(k) + w(k) observed by m scalar sensors
y_i(k) = C_i x(k) + v_i(k). Every random quantity comes from its own seeded
stream so that changing one part of an experiment never changes the noise
realization of another.
"""

import csv
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np

from evsync.core.errors import DimensionMismatch, InvalidSpec
from evsync.core.matops import as_matrix, is_psd, psd_sqrt
from evsync.core.noise import NoiseModel
from evsync.core.utils import Seed, child_seeds, make_rngs
from evsync.noises import NOISE_REGISTRY

logger = logging.getLogger("evsync.plantsim")


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PlantModel:
    """Monitored LTI plant: dynamics A, process noise Q, initial-state covariance."""

    A: np.ndarray
    Q: np.ndarray
    x0_cov: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A, "A")
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatch(f"A must be square, got shape {A.shape}")
        n = A.shape[0]
        Q = as_matrix(self.Q, "Q")
        x0_cov = as_matrix(self.x0_cov, "x0_cov")
        for name, M in (("Q", Q), ("x0_cov", x0_cov)):
            if M.shape != (n, n):
                raise DimensionMismatch(f"{name} must be {n}x{n}, got shape {M.shape}")
            if not is_psd(M):
                raise InvalidSpec(f"{name} must be symmetric positive semidefinite")
        object.__setattr__(self, "A", _freeze(A))
        object.__setattr__(self, "Q", _freeze(Q))
        object.__setattr__(self, "x0_cov", _freeze(x0_cov))

    @property
    def n(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class SensorSuite:
    """m scalar sensors: stacked observation rows C (m x n) and covariance R."""

    C: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        C = as_matrix(self.C, "C")
        R = as_matrix(self.R, "R")
        m = C.shape[0]
        if R.shape != (m, m):
            raise DimensionMismatch(f"R must be {m}x{m} for {m} sensors, got {R.shape}")
        if not is_psd(R):
            raise InvalidSpec("R must be symmetric positive semidefinite")
        object.__setattr__(self, "C", _freeze(C))
        object.__setattr__(self, "R", _freeze(R))

    @property
    def m(self) -> int:
        return self.C.shape[0]

    @property
    def n(self) -> int:
        return self.C.shape[1]

    def row(self, i: int) -> np.ndarray:
        """C_i as a 1 x n matrix."""
        return self.C[i : i + 1, :]

    @property
    def diagonal_noise(self) -> bool:
        return bool(np.count_nonzero(self.R - np.diag(np.diag(self.R))) == 0)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    One plant realization.

    ``states[k]`` is x(k) for k = 0..T and ``measurements[k]`` is y(k) for
    k = 1..T; ``measurements[0]`` is unused and set to NaN. The raw noise
    sequences are kept alongside: ``process_noise[k]`` is w(k) for k = 0..T-1
    and ``measurement_noise[k]`` is v(k), again with an unused row 0.
    """

    states: np.ndarray
    measurements: np.ndarray
    process_noise: Optional[np.ndarray] = None
    measurement_noise: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.states.ndim != 2 or self.measurements.ndim != 2:
            raise DimensionMismatch("states and measurements must be 2-D arrays")
        if self.states.shape[0] != self.measurements.shape[0]:
            raise DimensionMismatch(
                f"{self.states.shape[0]} states but {self.measurements.shape[0]} "
                f"measurement rows"
            )

    @property
    def horizon(self) -> int:
        return self.states.shape[0] - 1

    @property
    def has_noise(self) -> bool:
        return self.process_noise is not None and self.measurement_noise is not None

    @classmethod
    def zeros(cls, n: int, m: int, horizon: int) -> "Trajectory":
        """A noiseless realization starting at x(0) = 0."""
        measurements = np.zeros((horizon + 1, m))
        measurements[0] = np.nan
        return cls(
            states=np.zeros((horizon + 1, n)),
            measurements=measurements,
            process_noise=np.zeros((horizon, n)),
            measurement_noise=measurements.copy(),
        )

    def to_csv(self, path: str) -> None:
        """Dump the trajectory, one row per time step."""
        n, m = self.states.shape[1], self.measurements.shape[1]
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(
                ["k"] + [f"x{j}" for j in range(n)] + [f"y{i}" for i in range(m)]
            )
            for k in range(self.horizon + 1):
                ys = [""] * m if k == 0 else [repr(float(v)) for v in self.measurements[k]]
                writer.writerow([k] + [repr(float(v)) for v in self.states[k]] + ys)


def simulate_plant(model: PlantModel, sensors: SensorSuite, horizon: int,
                   seed: Seed) -> Trajectory:
    """
    Simulate x(0..T) and y(1..T).

    x(0) ~ N(0, x0_cov), w ~ N(0, Q) and v ~ N(0, R) come from independent
    child streams of ``seed``. With a diagonal R each sensor has its own
    stream; otherwise v is drawn jointly from the first sensor stream.

    Args:
        model: plant
        sensors: sensor suite with matching state dimension
        horizon: T >= 1
        seed: integer seed or SeedSequence

    Returns:
        Trajectory
    """
    if sensors.n != model.n:
        raise DimensionMismatch(
            f"sensors observe {sensors.n} states but the plant has {model.n}"
        )
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")

    n, m = model.n, sensors.m
    x0_rng, w_rng, *sensor_rngs = make_rngs(seed, 2 + m)

    states = np.empty((horizon + 1, n))
    states[0] = psd_sqrt(model.x0_cov) @ x0_rng.standard_normal(n)
    W = w_rng.standard_normal((horizon, n)) @ psd_sqrt(model.Q).T
    for k in range(horizon):
        states[k + 1] = model.A @ states[k] + W[k]

    if sensors.diagonal_noise:
        scale = np.sqrt(np.diag(sensors.R))
        V = np.column_stack([rng.standard_normal(horizon) for rng in sensor_rngs]) * scale
    else:
        V = sensor_rngs[0].standard_normal((horizon, m)) @ psd_sqrt(sensors.R).T

    measurements = np.full((horizon + 1, m), np.nan)
    measurements[1:] = states[1:] @ sensors.C.T + V
    noise = np.full((horizon + 1, m), np.nan)
    noise[1:] = V
    return Trajectory(
        states=_freeze(states),
        measurements=_freeze(measurements),
        process_noise=_freeze(W),
        measurement_noise=_freeze(noise),
    )


@dataclass(frozen=True)
class NoiseSpec:
    """Kind and parameters of an agent noise process."""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    def build(self, agent_count: int) -> NoiseModel:
        """Instantiate the registered model for ``agent_count`` agents."""
        cls = NOISE_REGISTRY.get(self.kind)
        if cls is None:
            raise InvalidSpec(
                f"unknown noise kind '{self.kind}'; available: "
                f"{', '.join(sorted(NOISE_REGISTRY))}"
            )
        return cls(agent_count, **self.params)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.params}


class NoiseProcess:
    """A noise model bound to its random streams for one trial."""

    def __init__(self, spec: NoiseSpec, agent_count: int, seed: Seed):
        self.model = spec.build(agent_count)
        streams = make_rngs(seed, agent_count + 1)
        self._agent_rngs = streams[:agent_count]
        self._shared_rng = streams[agent_count]

    def draw(self, k: int, etas: np.ndarray) -> np.ndarray:
        """z(k) for every agent given the current agent states."""
        rngs = [self._shared_rng] if self.model.joint else self._agent_rngs
        return self.model.sample(k, etas, rngs)

    def rng_for(self, i: int) -> np.random.Generator:
        return self._shared_rng if self.model.joint else self._agent_rngs[i]


def sample_agent_noise(noise: NoiseModel, agent_index: int, k: int,
                       eta_i: Optional[Sequence[float]],
                       rng: np.random.Generator) -> float:
    """
    Draw a single z_i(k).

    ``noise`` carries the per-trial state (the AR(1) memory, the current joint
    draw of a cross-correlated process); ``rng`` is agent i's stream, or the
    shared stream for jointly sampled kinds.
    """
    if not 0 <= agent_index < noise.agent_count:
        raise InvalidSpec(
            f"agent index {agent_index} outside 0..{noise.agent_count - 1}"
        )
    eta = np.zeros(1) if eta_i is None else np.asarray(eta_i, dtype=float)
    return noise.sample_agent(agent_index, k, eta, rng)


def seeds_for_trial(seed: Seed) -> Dict[str, np.random.SeedSequence]:
    """Named child seeds of one trial; each consumer derives its own streams."""
    plant, agents, initial = child_seeds(seed, 3)
    return {"plant": plant, "agents": agents, "initial": initial}


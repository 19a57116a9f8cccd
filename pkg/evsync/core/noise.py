"""
Agent noise base class.

Every noise kind the synchronization layer can be driven with derives from
NoiseModel and registers itself in ``evsync.noises.NOISE_REGISTRY``. A model
instance holds the per-trial state of one noise process for all m agents.
"""

import abc
import logging
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from evsync.core.errors import InvalidSpec, SimulationError

logger = logging.getLogger("evsync.core")


class NoiseModel(abc.ABC):
    """Abstract base class for agent noise processes z_i(k)."""

    # parameter names accepted by the kind; anything else is rejected
    parameters: Tuple[str, ...] = ()

    # True when all agents are sampled jointly from one shared stream
    joint: bool = False

    def __init__(self, agent_count: int, **params: Any):
        if agent_count < 1:
            raise InvalidSpec(f"agent_count must be positive, got {agent_count}")
        self.agent_count = agent_count
        self.params: Dict[str, Any] = dict(params)
        problems = self.problems()
        if problems:
            raise InvalidSpec(f"{self.name} noise: " + "; ".join(problems))
        self.reset()

    @property
    @abc.abstractmethod
    def name(self) -> str:
        """Registry name of the noise kind."""
        pass

    @property
    @abc.abstractmethod
    def description(self) -> str:
        pass

    @abc.abstractmethod
    def check_parameters(self) -> List[str]:
        """
        Validate kind-specific parameters.

        Returns:
            List of problems, empty when the parameters are valid
        """
        pass

    @abc.abstractmethod
    def sample_agent(self, i: int, k: int, eta_i: np.ndarray,
                     rng: np.random.Generator) -> float:
        """
        Draw z_i(k).

        Args:
            i: agent index
            k: time step; calls for one agent must come in increasing k
            eta_i: current state of agent i (used by state-dependent kinds)
            rng: the agent's stream, or the shared stream for joint kinds

        Returns:
            A zero-mean scalar sample
        """
        pass

    @abc.abstractmethod
    def variance_bound(self) -> float:
        """Uniform bound on Var z_i(k) along any trajectory."""
        pass

    def reset(self) -> None:
        """Clear per-trial state. Stateless kinds need nothing."""
        pass

    def problems(self) -> List[str]:
        unknown = sorted(set(self.params) - set(self.parameters))
        found = [f"unknown parameter '{p}'" for p in unknown]
        if not found:
            found.extend(self.check_parameters())
        return found

    def sample(self, k: int, etas: np.ndarray,
               rngs: Sequence[np.random.Generator]) -> np.ndarray:
        """
        Draw z(k) for all agents.

        This is a template method; subclasses implement sample_agent.

        Args:
            k: time step
            etas: agent states, one row per agent
            rngs: one generator per agent; joint kinds only use rngs[0]

        Returns:
            Vector of m samples
        """
        z = np.empty(self.agent_count)
        for i in range(self.agent_count):
            rng = rngs[0] if self.joint else rngs[i]
            z[i] = self.sample_agent(i, k, etas[i], rng)
        if not np.all(np.isfinite(z)):
            raise SimulationError(f"{self.name} noise produced non-finite samples at k={k}")
        return z

    def param(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(agent_count={self.agent_count}, params={self.params})"

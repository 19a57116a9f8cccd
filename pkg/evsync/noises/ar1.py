"""First-order autoregressive (time-correlated) agent noise."""

import logging
import math
from typing import List

import numpy as np

from evsync.core.noise import NoiseModel
from evsync.noises import NOISE_REGISTRY

logger = logging.getLogger("evsync.noises.ar1")


class AR1Noise(NoiseModel):
    """z_i(k) = phi * z_i(k-1) + sigma * g(k) with z_i(-1) = 0 and |phi| < 1."""

    parameters = ("phi", "variance")

    @property
    def name(self) -> str:
        return "ar1_correlated"

    @property
    def description(self) -> str:
        return "Time-correlated AR(1) noise driven by Gaussian innovations"

    def check_parameters(self) -> List[str]:
        problems = []
        phi = self.param("phi", 0.0)
        if not isinstance(phi, (int, float)) or not -1.0 < phi < 1.0:
            problems.append(f"phi must lie strictly inside (-1, 1), got {phi!r}")
        variance = self.param("variance", 1.0)
        if not isinstance(variance, (int, float)) or not math.isfinite(variance) or variance < 0:
            problems.append(f"variance must be a nonnegative number, got {variance!r}")
        return problems

    def reset(self) -> None:
        self._previous = np.zeros(self.agent_count)

    def sample_agent(self, i, k, eta_i, rng) -> float:
        sigma = math.sqrt(self.param("variance", 1.0))
        z = self.param("phi", 0.0) * self._previous[i] + sigma * rng.standard_normal()
        self._previous[i] = z
        return z

    def variance_bound(self) -> float:
        # stationary variance; the transient from z(-1) = 0 stays below it
        phi = self.param("phi", 0.0)
        return float(self.param("variance", 1.0)) / (1.0 - phi**2)


# Register this noise kind
NOISE_REGISTRY["ar1_correlated"] = AR1Noise

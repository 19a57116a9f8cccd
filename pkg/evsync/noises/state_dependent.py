"""Noise whose magnitude grows with the agent's own state, capped."""

import logging
import math
from typing import List

import numpy as np

from evsync.core.noise import NoiseModel
from evsync.noises import NOISE_REGISTRY

logger = logging.getLogger("evsync.noises.state_dependent")


class StateDependentNoise(NoiseModel):
    """
    z_i(k) = min(gain * ||eta_i(k)||, cap) * g.

    The cap keeps the covariance bounded before the agents synchronize. It
    defaults to 10 standard deviations of the configured base variance.
    """

    parameters = ("gain", "variance", "cap")

    @property
    def name(self) -> str:
        return "state_dependent"

    @property
    def description(self) -> str:
        return "Gaussian noise with standard deviation proportional to the state norm"

    @property
    def cap(self) -> float:
        cap = self.param("cap")
        if cap is None:
            return 10.0 * math.sqrt(self.param("variance", 1.0))
        return float(cap)

    def check_parameters(self) -> List[str]:
        problems = []
        for key, default in (("gain", 1.0), ("variance", 1.0)):
            value = self.param(key, default)
            if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                problems.append(f"{key} must be a nonnegative number, got {value!r}")
        cap = self.param("cap")
        if cap is not None and (
            not isinstance(cap, (int, float)) or not math.isfinite(cap) or cap < 0
        ):
            problems.append(f"cap must be a nonnegative finite number, got {cap!r}")
        return problems

    def sample_agent(self, i, k, eta_i, rng) -> float:
        std = min(self.param("gain", 1.0) * float(np.linalg.norm(eta_i)), self.cap)
        return std * rng.standard_normal()

    def variance_bound(self) -> float:
        return self.cap**2


# Register this noise kind
NOISE_REGISTRY["state_dependent"] = StateDependentNoise

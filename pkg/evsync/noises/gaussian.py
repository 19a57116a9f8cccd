"""Independent Gaussian agent noise."""

import logging
import math
from typing import List

from evsync.core.noise import NoiseModel
from evsync.noises import NOISE_REGISTRY

logger = logging.getLogger("evsync.noises.gaussian")


class GaussianNoise(NoiseModel):
    """z_i(k) = sigma * g with g standard normal, i.i.d. over agents and time."""

    parameters = ("variance",)

    @property
    def name(self) -> str:
        return "gaussian_iid"

    @property
    def description(self) -> str:
        return "Independent zero-mean Gaussian noise with fixed variance"

    def check_parameters(self) -> List[str]:
        variance = self.param("variance", 1.0)
        if not isinstance(variance, (int, float)) or not math.isfinite(variance) or variance < 0:
            return [f"variance must be a nonnegative number, got {variance!r}"]
        return []

    def sample_agent(self, i, k, eta_i, rng) -> float:
        return math.sqrt(self.param("variance", 1.0)) * rng.standard_normal()

    def variance_bound(self) -> float:
        return float(self.param("variance", 1.0))


# Register this noise kind
NOISE_REGISTRY["gaussian_iid"] = GaussianNoise

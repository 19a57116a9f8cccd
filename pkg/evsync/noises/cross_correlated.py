"""Noise correlated across agents, sampled jointly for the whole network."""

import logging
from typing import List

import numpy as np

from evsync.core.matops import is_psd, psd_sqrt
from evsync.core.noise import NoiseModel
from evsync.noises import NOISE_REGISTRY

logger = logging.getLogger("evsync.noises.cross_correlated")


class CrossCorrelatedNoise(NoiseModel):
    """
    z(k) = M g(k) jointly for all agents, with M Mᵀ = Sigma.

    M is the symmetric square root of the configured covariance, so
    rank-deficient (perfectly correlated) covariances are allowed.
    """

    parameters = ("covariance",)
    joint = True

    @property
    def name(self) -> str:
        return "cross_correlated"

    @property
    def description(self) -> str:
        return "Gaussian noise with a fixed cross-agent covariance"

    def check_parameters(self) -> List[str]:
        cov = self.param("covariance")
        if cov is None:
            return ["covariance matrix is required"]
        try:
            sigma = np.array(cov, dtype=float)
        except (TypeError, ValueError):
            return ["covariance must be a numeric matrix"]
        m = self.agent_count
        if sigma.shape != (m, m):
            return [f"covariance must be {m}x{m} for {m} agents, got shape {sigma.shape}"]
        if not np.all(np.isfinite(sigma)):
            return ["covariance entries must be finite"]
        if not is_psd(sigma):
            return ["covariance must be symmetric positive semidefinite"]
        return []

    def reset(self) -> None:
        self._root = psd_sqrt(self.param("covariance"))
        self._step = None
        self._current = np.zeros(self.agent_count)

    def sample_agent(self, i, k, eta_i, rng) -> float:
        # one joint draw per time step, shared by every agent
        if self._step != k:
            self._current = self._root @ rng.standard_normal(self.agent_count)
            self._step = k
        return float(self._current[i])

    def variance_bound(self) -> float:
        return float(np.max(np.diag(np.array(self.param("covariance"), dtype=float))))


# Register this noise kind
NOISE_REGISTRY["cross_correlated"] = CrossCorrelatedNoise

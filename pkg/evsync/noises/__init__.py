"""Noise kinds for the standalone synchronization experiments."""

from typing import Dict, Type

from evsync.core.noise import NoiseModel

# This will be populated by each noise module
NOISE_REGISTRY: Dict[str, Type[NoiseModel]] = {}

# Import all noise modules to ensure they register themselves
from . import gaussian  # noqa: E402,F401
from . import state_dependent  # noqa: E402,F401
from . import ar1  # noqa: E402,F401
from . import cross_correlated  # noqa: E402,F401

"""Experiment implementations: distributed estimation and standalone synchronization."""

from typing import Dict, Type

from evsync.core.experiment import Experiment

# This will be populated by each experiment module
EXPERIMENT_REGISTRY: Dict[str, Type[Experiment]] = {}

# Import all experiment modules to ensure they register themselves
from . import estimation  # noqa: E402,F401
from . import sync_only  # noqa: E402,F401


def experiment_for(config) -> Experiment:
    """The experiment that runs ``config``."""
    name = "sync-only" if config.sync_only else "estimation"
    return EXPERIMENT_REGISTRY[name](config)

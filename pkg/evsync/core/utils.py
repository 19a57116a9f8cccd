"""Utility functions for the evsync package."""

import logging
import math
import multiprocessing
import os
from typing import Any, Callable, Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy import stats

logger = logging.getLogger("evsync.utils")

# two-sided 95% normal quantile
Z95 = float(stats.norm.ppf(0.975))

Seed = Union[int, np.random.SeedSequence]


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def child_seeds(seed: Seed, count: int) -> List[np.random.SeedSequence]:
    """
    Derive ``count`` independent child seeds.

    Unlike ``SeedSequence.spawn`` this does not mutate the parent, so calling
    it twice with the same seed gives the same children.

    Args:
        seed: integer master seed or a SeedSequence
        count: number of children

    Returns:
        List of SeedSequence objects
    """
    parent = as_seed_sequence(seed)
    return [
        np.random.SeedSequence(parent.entropy, spawn_key=tuple(parent.spawn_key) + (j,))
        for j in range(count)
    ]


def make_rngs(seed: Seed, count: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in child_seeds(seed, count)]


def mean_half_width(samples: Sequence[float]) -> Tuple[float, float]:
    """
    Sample mean and 95% normal-approximation confidence half-width.

    Args:
        samples: one value per trial

    Returns:
        (mean, half_width); half_width is 0 for a single sample
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return math.nan, math.nan
    if x.size == 1:
        return float(x[0]), 0.0
    return float(np.mean(x)), float(Z95 * np.std(x, ddof=1) / math.sqrt(x.size))


def trend_slope(values: Sequence[float]) -> Tuple[float, float]:
    """
    Least-squares slope of ``values`` against their index.

    Returns:
        (slope, 95% half-width of the slope)
    """
    y = np.asarray(values, dtype=float)
    if y.size < 3:
        return 0.0, 0.0
    fit = stats.linregress(np.arange(y.size, dtype=float), y)
    return float(fit.slope), float(Z95 * fit.stderr)


def format_vector(v, precision: int = 4) -> str:
    """Format a real vector like [0.8000, -0.4100]."""
    values = np.real_if_close(np.ravel(np.asarray(v)))
    return "[" + ", ".join(_format_number(x, precision) for x in values) + "]"


def format_matrix(M, precision: int = 4, indent: str = "  ") -> str:
    rows = np.atleast_2d(np.asarray(M))
    return "\n".join(indent + format_vector(row, precision) for row in rows)


def _format_number(x, precision: int) -> str:
    if np.iscomplexobj(x) and abs(np.imag(x)) > 0:
        return f"{np.real(x):.{precision}f}{np.imag(x):+.{precision}f}j"
    return f"{float(np.real(x)):.{precision}f}"


def percentage(x: float) -> str:
    """Format a fraction as a percentage (e.g., "66.5%")."""
    if x is None or not math.isfinite(x):
        return "n/a"
    return f"{100.0 * x:.1f}%"


def available_workers() -> int:
    return max(1, os.cpu_count() or 1)


def run_tasks(worker: Callable[[Dict[str, Any]], Dict[str, Any]],
              tasks: Sequence[Dict[str, Any]], workers: int = 1,
              progress_every: int = 100) -> List[Dict[str, Any]]:
    """
    Map a module-level worker over task dicts, optionally in a process pool.

    Every task and result carries an ``index``; results come back sorted by
    it, so the output does not depend on the number of workers.

    Args:
        worker: picklable function of one task dict
        tasks: task dicts with an ``index`` key
        workers: process count; 1 runs in-process
        progress_every: log progress every this many results

    Returns:
        Results sorted by index
    """
    total = len(tasks)
    results: List[Dict[str, Any]] = []

    def collect(iterable):
        for r in iterable:
            results.append(r)
            if len(results) % progress_every == 0:
                logger.info(f"{len(results)}/{total} trials done")

    if workers <= 1 or total <= 1:
        collect(map(worker, tasks))
    else:
        with multiprocessing.Pool(min(workers, total)) as pool:
            collect(pool.imap_unordered(worker, tasks))
    results.sort(key=lambda r: r["index"])
    return results

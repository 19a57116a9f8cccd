#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Plot the mean squared estimation error of every sensor.

Reads mean_mse.csv (and summary.json, when present, for trace(P)) from an
evsync output directory and writes mse.png next to them.

Example: python scripts/plot_mse.py results/four_sensor_ring
"""

import argparse
import csv
import json
import logging
import sys
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger("evsync.plot")


def read_mean_mse(path: Path) -> Dict[int, List[float]]:
    """Per-sensor mean MSE curves from mean_mse.csv, indexed by k."""
    curves: Dict[int, Dict[int, float]] = defaultdict(dict)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            curves[int(row["sensor"])][int(row["k"])] = float(row["mean_mse"])
    return {i: [c[k] for k in sorted(c)] for i, c in sorted(curves.items())}


def read_trace_p(path: Path) -> Optional[float]:
    if not path.exists():
        return None
    with open(path) as f:
        summary = json.load(f)
    return summary.get("design", {}).get("kalman", {}).get("trace_P")


def plot(out_dir: Path, log_scale: bool = False) -> Path:
    curves = read_mean_mse(out_dir / "mean_mse.csv")
    trace_p = read_trace_p(out_dir / "summary.json")

    plt.figure(figsize=(8, 5))
    for i, curve in curves.items():
        plt.plot(range(len(curve)), curve, label=f"sensor {i + 1}")
    if trace_p is not None:
        plt.axhline(trace_p, color="k", linestyle="--", linewidth=1, label="trace(P)")
    if log_scale:
        plt.yscale("log")
    plt.xlabel("k")
    plt.ylabel("mean squared error")
    plt.title("Mean squared estimation error per sensor")
    plt.grid(True)
    plt.legend()
    plt.tight_layout()

    target = out_dir / "mse.png"
    plt.savefig(target, dpi=150)
    plt.close()
    return target


def main(args: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(description="Plot per-sensor MSE curves")
    parser.add_argument("out_dir", help="evsync output directory containing mean_mse.csv")
    parser.add_argument("--log", action="store_true", help="Logarithmic y axis")
    parsed = parser.parse_args(args)

    out_dir = Path(parsed.out_dir)
    if not (out_dir / "mean_mse.csv").exists():
        logger.error(f"{out_dir / 'mean_mse.csv'} not found; run 'evsync run' first")
        return 1
    print(f"wrote {plot(out_dir, parsed.log)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Tests for the core functionality of evsync."""

import json
import math

import numpy as np
import pytest

from evsync.core.errors import DesignError, InvalidSpec, SimulationError
from evsync.core.experiment import Artifact, Experiment, write_artifacts
from evsync.core.noise import NoiseModel
from evsync.core.utils import (
    child_seeds,
    format_vector,
    mean_half_width,
    percentage,
    run_tasks,
    trend_slope,
)


def test_percentage():
    """Test the percentage function."""
    assert percentage(0.0) == "0.0%"
    assert percentage(0.665) == "66.5%"
    assert percentage(1.0) == "100.0%"
    assert percentage(math.nan) == "n/a"
    assert percentage(None) == "n/a"


def test_format_vector():
    assert format_vector([0.8, -0.41]) == "[0.8000, -0.4100]"
    assert format_vector(np.array([1.0 + 0.0j])) == "[1.0000]"


def test_mean_half_width():
    mean, hw = mean_half_width([1.0, 2.0, 3.0])
    assert mean == pytest.approx(2.0)
    assert hw == pytest.approx(1.959964 * 1.0 / math.sqrt(3), rel=1e-5)
    assert mean_half_width([4.0]) == (4.0, 0.0)
    mean, hw = mean_half_width([])
    assert math.isnan(mean) and math.isnan(hw)


def test_trend_slope():
    slope, hw = trend_slope([1.0, 3.0, 5.0, 7.0])
    assert slope == pytest.approx(2.0)
    assert hw == pytest.approx(0.0, abs=1e-9)
    assert trend_slope([1.0, 2.0]) == (0.0, 0.0)


def test_child_seeds_are_reproducible():
    first = [s.generate_state(2).tolist() for s in child_seeds(11, 3)]
    second = [s.generate_state(2).tolist() for s in child_seeds(11, 3)]
    assert first == second
    assert len({tuple(s) for s in first}) == 3


def _square(task):
    return {"index": task["index"], "value": task["x"] ** 2}


def test_run_tasks_sorted_by_index():
    tasks = [{"index": i, "x": x} for i, x in enumerate([3, 1, 2])]
    results = run_tasks(_square, tasks, workers=1)
    assert [r["value"] for r in results] == [9, 1, 4]


class MockConfig:
    """Minimal stand-in for RunConfig."""

    name = "mock-config"

    def to_dict(self, runtime=True):
        return {"name": self.name, "runtime": runtime}


class MockExperiment(Experiment):
    """Mock experiment for testing."""

    def __init__(self, config=None):
        super().__init__(config or MockConfig())
        self.problems = []
        self.design_error = None
        self.simulated = []

    @property
    def name(self):
        return "mock"

    @property
    def description(self):
        return "Mock experiment for testing"

    def check_prerequisites(self):
        return self.problems

    def design(self):
        if self.design_error is not None:
            raise self.design_error
        return {"gain": 0.5}

    def describe(self, design):
        return dict(design)

    def simulate(self, design):
        self.simulated.append(design)
        return {"mse": 1.25}


def test_experiment_design_only():
    """Design-only runs never simulate and write nothing."""
    experiment = MockExperiment()
    result = experiment.run(design_only=True)
    assert result.success is True
    assert result.exit_code == 0
    assert result.design == {"gain": 0.5}
    assert result.summary == {}
    assert experiment.simulated == []
    assert result.artifacts == []


def test_experiment_actual_run(tmp_path):
    experiment = MockExperiment()
    result = experiment.run(out_dir=str(tmp_path))
    assert result.success is True
    assert len(experiment.simulated) == 1
    assert result.artifacts == [str(tmp_path / "summary.json")]

    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["experiment"] == "mock"
    assert summary["config"] == {"name": "mock-config", "runtime": False}
    assert summary["design"] == {"gain": 0.5}
    assert summary["results"] == {"mse": 1.25}
    assert not list(tmp_path.glob("*.tmp"))


def test_experiment_prerequisites_fail():
    experiment = MockExperiment()
    experiment.problems = ["no plant", "no sensors"]
    result = experiment.run()
    assert result.success is False
    assert result.exit_code == 1
    assert result.error == "no plant; no sensors"
    assert experiment.simulated == []


def test_experiment_design_error_is_reported():
    experiment = MockExperiment()
    experiment.design_error = DesignError("infeasible")
    result = experiment.run()
    assert result.success is False
    assert "Design failed" in result.error
    assert experiment.simulated == []


def test_experiment_unexpected_error_is_reported():
    experiment = MockExperiment()
    experiment.design_error = RuntimeError("boom")
    result = experiment.run()
    assert result.success is False
    assert "boom" in result.error


def test_write_artifacts_csv_and_json(tmp_path):
    written = write_artifacts(
        tmp_path,
        [
            Artifact("a.json", payload={"b": 1, "a": [0.1]}),
            Artifact("t.csv", header=("k", "x"), rows=lambda: [(0, 0.1), (1, 1 / 3)]),
        ],
    )
    assert len(written) == 2
    assert json.loads((tmp_path / "a.json").read_text()) == {"a": [0.1], "b": 1}
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines == ["k,x", "0,0.1", f"1,{1 / 3!r}"]


def test_write_artifacts_leaves_nothing_on_failure(tmp_path):
    def broken():
        yield (0, 1.0)
        raise ValueError("disk full")

    with pytest.raises(ValueError):
        write_artifacts(
            tmp_path,
            [
                Artifact("ok.json", payload={"fine": True}),
                Artifact("bad.csv", header=("k", "x"), rows=broken),
            ],
        )
    assert list(tmp_path.iterdir()) == []


class MockNoise(NoiseModel):
    """Constant noise for testing the sampling template."""

    parameters = ("value",)

    @property
    def name(self):
        return "mock"

    @property
    def description(self):
        return "Constant noise for testing"

    def check_parameters(self):
        if self.param("value", 0.0) is None:
            return ["value is required"]
        return []

    def sample_agent(self, i, k, eta_i, rng):
        return float(self.param("value", 0.0)) + i

    def variance_bound(self):
        return 0.0


def test_noise_sample_template():
    noise = MockNoise(3, value=1.0)
    rngs = [np.random.default_rng(i) for i in range(3)]
    z = noise.sample(0, np.zeros((3, 2)), rngs)
    assert z.tolist() == [1.0, 2.0, 3.0]


def test_noise_rejects_unknown_parameter():
    with pytest.raises(InvalidSpec, match="unknown parameter 'scale'"):
        MockNoise(2, scale=1.0)


def test_noise_rejects_bad_agent_count():
    with pytest.raises(InvalidSpec):
        MockNoise(0)


def test_noise_non_finite_sample_raises():
    noise = MockNoise(1, value=math.inf)
    with pytest.raises(SimulationError):
        noise.sample(0, np.zeros((1, 1)), [np.random.default_rng(0)])

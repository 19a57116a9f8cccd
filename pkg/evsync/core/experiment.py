"""
Experiment base class.

An experiment turns a validated RunConfig into a design, runs its simulation
and writes its artifacts. Concrete experiments register themselves in
``evsync.experiments.EXPERIMENT_REGISTRY``.
"""

import abc
import csv
import json
import logging
import os
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

from evsync.core.errors import EvsyncError

logger = logging.getLogger("evsync.core")


@dataclass
class ExperimentResult:
    """Outcome of Experiment.run."""

    experiment: str
    success: bool
    design: Dict[str, Any] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    report: List[str] = field(default_factory=list)
    artifacts: List[str] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def exit_code(self) -> int:
        return 0 if self.success else 1


@dataclass
class Artifact:
    """One output file: a JSON document or a CSV table."""

    filename: str
    payload: Any = None
    header: Optional[Sequence[str]] = None
    rows: Optional[Callable[[], Iterable[Sequence[Any]]]] = None

    def write(self, path: Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            if self.rows is None:
                json.dump(self.payload, f, indent=2, sort_keys=True)
                f.write("\n")
            else:
                writer = csv.writer(f)
                writer.writerow(self.header)
                for row in self.rows():
                    writer.writerow([_csv_value(v) for v in row])


def _csv_value(v: Any) -> Any:
    if isinstance(v, float):
        return repr(v)
    return v


def write_artifacts(out_dir: Path, artifacts: Sequence[Artifact]) -> List[str]:
    """
    Write every artifact to a temporary name, then rename them all.

    On any failure the temporary files and the ones already renamed are
    removed, so a failed run leaves no partial output behind.

    Returns:
        The written paths
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pending = []
    done: List[Path] = []
    try:
        for artifact in artifacts:
            final = out_dir / artifact.filename
            tmp = final.with_suffix(final.suffix + ".tmp")
            pending.append(tmp)
            artifact.write(tmp)
        for artifact, tmp in zip(artifacts, pending):
            final = out_dir / artifact.filename
            os.replace(tmp, final)
            done.append(final)
    except Exception:
        for path in pending + done:
            if path.exists():
                path.unlink()
        raise
    for path in done:
        logger.info(f"Wrote {path}")
    return [str(p) for p in done]


class Experiment(abc.ABC):
    """Abstract base class for all experiments."""

    def __init__(self, config):
        self.config = config

    @property
    @abc.abstractmethod
    def name(self) -> str:
        """Get the name of the experiment."""
        pass

    @property
    @abc.abstractmethod
    def description(self) -> str:
        pass

    @abc.abstractmethod
    def check_prerequisites(self) -> List[str]:
        """
        Check the parts of the config this experiment needs.

        Returns:
            List of problems, empty when the experiment can run
        """
        pass

    @abc.abstractmethod
    def design(self) -> Any:
        """Run the design pipeline and return the design object."""
        pass

    @abc.abstractmethod
    def describe(self, design: Any) -> Dict[str, Any]:
        """JSON-ready certificate of a design."""
        pass

    @abc.abstractmethod
    def simulate(self, design: Any) -> Dict[str, Any]:
        """
        Run the simulation for a design.

        Returns:
            JSON-ready aggregate results
        """
        pass

    def artifacts(self, result: ExperimentResult) -> List[Artifact]:
        """Files written after a successful simulation; summary.json by default."""
        return [Artifact("summary.json", payload=self.summary_document(result))]

    def report(self, result: ExperimentResult) -> List[str]:
        """Lines of the one-screen summary."""
        return [f"{self.name}: {'ok' if result.success else 'failed'}"]

    def summary_document(self, result: ExperimentResult) -> Dict[str, Any]:
        return {
            "experiment": self.name,
            "config": self.config.to_dict(runtime=False),
            "design": result.design,
            "results": result.summary,
        }

    def run(self, out_dir: Optional[str] = None, design_only: bool = False) -> ExperimentResult:
        """
        Main method to run the experiment.

        This is a template method; subclasses implement the abstract steps.

        Args:
            out_dir: directory for the artifacts; None writes nothing
            design_only: stop after the design phase

        Returns:
            ExperimentResult; failures in any phase are logged and reported
            in the result instead of raised
        """
        logger.info(f"Running {self.name} experiment '{self.config.name}'")
        result = ExperimentResult(experiment=self.name, success=False)

        try:
            problems = self.check_prerequisites()
        except Exception as e:
            return self._fail(result, f"Error checking prerequisites for {self.name}: {e}")
        if problems:
            return self._fail(result, "; ".join(problems))

        try:
            design = self.design()
            result.design = self.describe(design)
        except EvsyncError as e:
            return self._fail(result, f"Design failed: {e}")
        except Exception as e:
            return self._fail(result, f"Unexpected error in the design phase: {e}")

        if not design_only:
            try:
                result.summary = self.simulate(design)
            except EvsyncError as e:
                return self._fail(result, f"Simulation failed: {e}")
            except Exception as e:
                return self._fail(result, f"Unexpected error in the simulation: {e}")

        result.success = True
        result.report = self.report(result)

        if out_dir is not None:
            try:
                result.artifacts = write_artifacts(Path(out_dir), self.artifacts(result))
            except Exception as e:
                result.success = False
                result.report = []
                return self._fail(result, f"Error writing outputs to {out_dir}: {e}")
        return result

    def _fail(self, result: ExperimentResult, message: str) -> ExperimentResult:
        logger.error(message)
        logger.debug(traceback.format_exc())
        result.success = False
        result.error = message
        return result

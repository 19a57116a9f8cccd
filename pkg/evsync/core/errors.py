"""
Exception hierarchy for evsync.

Every error raised by the library derives from EvsyncError so callers (the
experiment template method, the CLI) can catch one type at the boundary.
"""

from typing import Iterable, List


class EvsyncError(Exception):
    """Base exception for all evsync errors."""
    pass


# Linear algebra


class LinalgError(EvsyncError):
    """Base exception for numerical linear-algebra failures."""
    pass


class NonSquare(LinalgError):
    """A square matrix was required."""
    pass


class DimensionMismatch(LinalgError):
    """Operand shapes are incompatible."""
    pass


class ConvergenceFailure(LinalgError):
    """An iterative decomposition did not converge."""
    pass


class MaxIterationsExceeded(LinalgError):
    """A fixed-point iteration hit its iteration cap."""
    pass


class SingularInnovation(LinalgError):
    """C P Cᵀ + R is singular."""
    pass


class SingularSolve(LinalgError):
    """A linear solve was numerically singular."""
    pass


class CommonEigenvalue(LinalgError):
    """The two coefficient matrices of a Sylvester equation share an eigenvalue."""
    pass


# System properties


class SystemPropertyError(EvsyncError):
    """Base exception for violated structural assumptions."""
    pass


class NotObservable(SystemPropertyError):
    """(A, C) is not observable."""
    pass


class NotControllable(SystemPropertyError):
    """(S, B) is not controllable."""
    pass


# Graphs


class GraphError(EvsyncError):
    """Base exception for communication graph problems."""
    pass


class InvalidGraph(GraphError):
    """Adjacency is not symmetric, nonnegative, or has self loops."""
    pass


class Disconnected(GraphError):
    """The communication graph is not connected."""
    pass


# Design


class DesignError(EvsyncError):
    """Base exception for synchronization / decomposition design failures."""
    pass


class Infeasible(DesignError):
    """Mahler measure of S violates the synchronization threshold."""

    def __init__(self, mahler: float, threshold: float):
        self.mahler = mahler
        self.threshold = threshold
        super().__init__(
            f"Mahler measure {mahler:.6g} is not below the synchronization "
            f"threshold (1+mu2/mum)/(1-mu2/mum) = {threshold:.6g}"
        )


class InfeasibleZeta(DesignError):
    """zeta * Mahler(S) >= 1, the modified Riccati inequality has no solution."""
    pass


class ZetaOutOfRange(DesignError):
    """A requested zeta violates Mahler(S) < 1/zeta <= threshold."""
    pass


class PerturbationExhausted(DesignError):
    """Gain perturbation could not make the spectrum of A-KCA admissible."""
    pass


class InconsistentBetaSystem(DesignError):
    """The stacked beta system has a residual above tolerance."""
    pass


class ComplexSpectrumDisallowed(DesignError):
    """A-KCA has complex eigenvalues while allow_complex is false."""
    pass


# Simulation


class SimulationError(EvsyncError):
    """Base exception for simulation-time failures."""
    pass


class InvalidSpec(SimulationError):
    """A noise specification is malformed."""
    pass


class ClockSkew(SimulationError):
    """A held state was requested before its broadcast time."""
    pass


class ImaginaryResidue(SimulationError):
    """A quantity that must be real carries a non-negligible imaginary part."""
    pass


# Configuration


class ConfigError(EvsyncError):
    """Base exception for configuration problems."""
    pass


class ParseError(ConfigError):
    """The configuration document could not be parsed."""
    pass


class ValidationError(ConfigError):
    """The configuration violates one or more preconditions."""

    def __init__(self, problems: Iterable[str]):
        self.problems: List[str] = list(problems)
        lines = "\n".join(f"  - {p}" for p in self.problems)
        super().__init__(f"{len(self.problems)} configuration problem(s):\n{lines}")

"""Exception taxonomy shared across the package.

The CLI maps these onto its exit codes, so solver code should raise the
most specific class that applies rather than bare ValueError.
"""


class InputError(ValueError):
    """Arguments outside the documented domain of an operation."""


class StructuralError(InputError):
    """Coefficient set lacks required structure (e.g. separable factors)."""


class DivergenceError(InputError):
    """Evaluation requested at a point where the integral diverges."""


class RangeError(InputError):
    """Inversion target outside the range of a monotone map."""


class SolverError(RuntimeError):
    """Base class for time-integration failures."""


class BlowUpError(SolverError):
    """NaN or Inf appeared in the solution."""


class StiffnessError(SolverError):
    """Stable time step underflowed (dt < 1e-14)."""


class InvariantViolationError(SolverError):
    """Discrete solution left the invariant region beyond tolerance."""


class CrossingConditionError(RuntimeError):
    """Crossing-pattern condition for the phase-plane construction failed.

    ``clause`` names the violated requirement.
    """

    def __init__(self, clause: str, message: str = ""):
        self.clause = clause
        super().__init__(message or f"crossing condition failed: {clause}")


class ConstructionError(RuntimeError):
    """Flat-hump assembly failed (e.g. the orbit never saturates)."""

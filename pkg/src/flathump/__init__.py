"""Numerical laboratory for a degenerate volume-filling chemotaxis system.

Simulates the eps-regularized system with a conservative finite-volume
scheme, constructs flat-hump stationary solutions by a phase-plane shooting
procedure, and verifies the computationally checkable structural claims
(mass conservation, invariant region, eps-convergence, stationarity).
"""

from .coefficients import (
    CoefficientSet,
    GammaBeta,
    preset,
    preset_names,
    regularize,
    with_reaction,
)
from .pde import Grid1D, SolverConfig, State, run, step
from .stationary import (
    PhaseOrbit,
    PhaseParams,
    StationaryProfile,
    construct_flat_hump,
    find_crossings,
)

__all__ = [
    "CoefficientSet",
    "GammaBeta",
    "Grid1D",
    "PhaseOrbit",
    "PhaseParams",
    "SolverConfig",
    "State",
    "StationaryProfile",
    "construct_flat_hump",
    "find_crossings",
    "preset",
    "preset_names",
    "regularize",
    "run",
    "step",
    "with_reaction",
]

__version__ = "0.1.0"

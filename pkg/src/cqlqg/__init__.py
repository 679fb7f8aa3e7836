"""Optimal coherent quantum LQG controller synthesis.

Physically realizable controllers are parameterized by a symmetric
Hamiltonian matrix R and coupling b = [b1 b2]; the package provides the
closed-loop cost, its derivatives in (R, b), the Newton-like synthesis
loop and the classical LQG baseline.
"""

__version__ = "0.1.0"

from .classical import classical_controller, compare, solve_care  # noqa: E402
from .errors import CQLQGError, InitializationFailed, Unstable, ValidationError  # noqa: E402
from .model import (ControllerParams, PlantModel, closed_loop, realize_controller,  # noqa: E402
                    recover_R, validate_plant)
from .optimizer import SolveConfig, SynthesisReport, check_criticality, synthesize  # noqa: E402

__all__ = [
    "__version__",
    "CQLQGError", "InitializationFailed", "Unstable", "ValidationError",
    "ControllerParams", "PlantModel", "closed_loop", "realize_controller", "recover_R",
    "validate_plant",
    "SolveConfig", "SynthesisReport", "check_criticality", "synthesize",
    "classical_controller", "compare", "solve_care",
]

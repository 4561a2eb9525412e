"""Optimal thermal insulation: radial oracle, boundary-fitted shape optimisation,
phase-field relaxation and post-hoc analysis of minimisers."""
from .errors import InsulateError, PreconditionError, SolverError
from .grid import FaceSet, GridField
from .model import (Disk, EnergyBreakdown, GridMask, ProblemConfig, SBVParams, StarDomain,
                    Union2, energy_phase_field, energy_sbv, energy_sharp)

__version__ = "0.1.0"

__all__ = [
    "Disk", "EnergyBreakdown", "FaceSet", "GridField", "GridMask", "InsulateError",
    "PreconditionError", "ProblemConfig", "SBVParams", "SolverError", "StarDomain", "Union2",
    "energy_phase_field", "energy_sbv", "energy_sharp",
]

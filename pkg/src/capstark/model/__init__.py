"""Particle systems, potentials, grids and undistorted operator assembly."""
from .grid import Axis, Grid
from .operators import OperatorMatrix, assemble_cap, assemble_hamiltonian
from .potentials import (REGISTRY, AnalyticRegion, GaussianWell, PotentialSpec, make_potential)
from .symmetry import restrict, sector_basis, sector_projector
from .system import ParticleSystem
from .validation import SamplingPlan, ValidationReport, validate_assumption

__all__ = [
    "Axis", "Grid", "OperatorMatrix", "assemble_cap", "assemble_hamiltonian", "REGISTRY",
    "AnalyticRegion", "GaussianWell", "PotentialSpec", "make_potential", "restrict",
    "sector_basis", "sector_projector", "ParticleSystem", "SamplingPlan", "ValidationReport",
    "validate_assumption",
]

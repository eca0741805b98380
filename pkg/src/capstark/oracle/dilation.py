"""Complex-dilation resonance solver, independent of the cone distortion."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..model.grid import Grid
from ..model.operators import OperatorMatrix, _check_grid, embed_particle, laplacian_kinetic, potential_diagonal
from ..model.potentials import PotentialSpec
from ..model.system import ParticleSystem
from ..spectra import EigConfig, Eigenpair, EigenList, SpectralWindow, eigs_in_window


@dataclass(frozen=True)
class DilationParams:
    """Dilation angle ``phi`` in ``(0, pi/3)`` and the grid of the dilated problem.

    ``phi_check`` is the second angle of the stability test.
    """

    phi: float
    grid: Grid
    phi_check: float | None = None
    order: int = 4
    rtol: float = 1e-6

    def __post_init__(self):
        for p in (self.phi, self.phi_check if self.phi_check is not None else self.phi):
            if not 0 < p < math.pi / 3:
                raise ValueError(f"dilation angle {p} must lie in (0, pi/3)")
        if self.phi_check is not None and self.phi_check == self.phi:
            raise ValueError("the two dilation angles must differ")

    @property
    def angles(self) -> tuple[float, float]:
        return self.phi, (self.phi_check if self.phi_check is not None else 1.5 * self.phi)


def dilated_operator(system: ParticleSystem, pot: PotentialSpec, grid: Grid, phi: float,
                     order: int = 4) -> OperatorMatrix:
    """``e^{-2i phi} T + V(e^{i phi} x) + e^{i phi} q.x`` on the grid."""
    _check_grid(system, grid)
    rot = np.exp(1j * phi)
    T = sp.csr_matrix((grid.size, grid.size), dtype=complex)
    for j in range(system.N):
        Tj = laplacian_kinetic(grid.particle_grid(j, system.d), system.masses[j], order)
        T = T + embed_particle(Tj, grid, j, system.d)
    pos = [rot * grid.particle_coords(j, system.d) for j in range(system.N)]
    diag = potential_diagonal(system, pot, pos)
    M = rot ** (-2) * T + sp.diags(diag)
    return OperatorMatrix(M, grid, "dilated", {"phi": float(phi), "order": order})


def _stable(a: EigenList, b: EigenList, rtol: float):
    vb = b.values
    out = []
    for p in a:
        if len(vb) == 0:
            break
        dist = float(np.min(np.abs(vb - p.value)))
        if dist <= rtol * max(1.0, abs(p.value)):
            out.append(p)
    return out


def dilation_resonances(system: ParticleSystem, pot: PotentialSpec, params: DilationParams,
                        window: SpectralWindow, eig_config: EigConfig | None = None) -> EigenList:
    """Eigenvalues of the dilated operator in ``window`` that do not move with the angle.

    Both angles are solved independently; an eigenvalue of the first is kept
    when the second has one within ``rtol * max(1, |z|)``.  Rejected values
    (rotated continuum) are listed in ``warnings``.
    """
    cfg = eig_config or EigConfig()
    phi1, phi2 = params.angles
    a = eigs_in_window(dilated_operator(system, pot, params.grid, phi1, params.order), window, cfg)
    b = eigs_in_window(dilated_operator(system, pot, params.grid, phi2, params.order), window, cfg)
    keep = _stable(a, b, params.rtol)
    rejected = [p.value for p in a if p not in keep]
    notes = list(a.warnings)
    if rejected:
        notes.append(f"{len(rejected)} angle-dependent eigenvalues rejected")
    return EigenList(keep, notes)

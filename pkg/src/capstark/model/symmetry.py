"""Permutation-symmetry sectors for identical particles.

A node of the many-body grid is a tuple ``(p_1, ..., p_N)`` of single-particle
node indices; with particle-major C ordering its flat index is
``sum_j p_j * M**(N-1-j)`` where ``M`` is the single-particle grid size.
Sector bases are built from normalized orbit sums of such tuples.
"""
from __future__ import annotations

import math
from itertools import permutations

import numpy as np
import scipy.sparse as sp

from .grid import Grid
from .operators import OperatorMatrix
from .system import ParticleSystem

SECTORS = ("symmetric", "antisymmetric")


def _perm_sign(p) -> int:
    p = list(p)
    sign = 1
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def basis_from_shape(M: int, N: int, sector: str) -> sp.csr_matrix:
    """Orthonormal sector basis, shape ``(M**N, dim)``, for ``N`` particles on ``M`` nodes each."""
    if sector not in SECTORS:
        raise ValueError(f"sector must be one of {SECTORS}, got {sector!r}")
    if M < 1 or N < 1:
        raise ValueError("need M >= 1 and N >= 1")
    weights = M ** np.arange(N - 1, -1, -1)
    perms = list(permutations(range(N)))
    signs = np.array([_perm_sign(p) for p in perms])
    # canonical representatives: nondecreasing tuples (strictly increasing for antisymmetric)
    reps = np.array(np.unravel_index(np.arange(M**N), (M,) * N)).T
    diffs = np.diff(reps, axis=1)
    keep = np.all(diffs >= (1 if sector == "antisymmetric" else 0), axis=1)
    reps = reps[keep]
    rows, cols, vals = [], [], []
    for c, t in enumerate(reps):
        images = {}
        for p, s in zip(perms, signs):
            key = int(np.dot(t[list(p)], weights))
            coeff = 1.0 if sector == "symmetric" else float(s)
            images[key] = coeff  # repeated keys only occur in the symmetric case
        norm = math.sqrt(len(images))
        for key, coeff in images.items():
            rows.append(key)
            cols.append(c)
            vals.append(coeff / norm)
    return sp.csr_matrix((vals, (rows, cols)), shape=(M**N, len(reps)))


def _check_identical(system: ParticleSystem, grid: Grid):
    if not system.identical_particles:
        raise ValueError("sector projection needs identical particles (equal masses and couplings)")
    if grid.ndim != system.ndim:
        raise ValueError(f"grid dimension {grid.ndim} does not match d*N = {system.ndim}")
    first = grid.particle_axes(0, system.d)
    for j in range(1, system.N):
        if grid.particle_axes(j, system.d) != first:
            raise ValueError("sector projection needs identical per-particle axes")


def sector_basis(system: ParticleSystem, grid: Grid, sector: str) -> sp.csr_matrix:
    """Orthonormal basis (columns) of the chosen permutation sector."""
    _check_identical(system, grid)
    M = grid.particle_grid(0, system.d).size
    return basis_from_shape(M, system.N, sector)


def sector_projector(system: ParticleSystem, grid: Grid, sector: str) -> OperatorMatrix:
    """Orthogonal projector onto the symmetric or antisymmetric sector.

    Identical one-body potentials are the caller's responsibility; masses,
    couplings and per-particle axes are checked here.
    """
    B = sector_basis(system, grid, sector)
    return OperatorMatrix(B @ B.T, grid, "projector", {"sector": sector})


def restrict(A: OperatorMatrix, basis: sp.spmatrix) -> np.ndarray | sp.csr_matrix:
    """Matrix of ``A`` compressed to the span of an orthonormal real basis."""
    return sp.csr_matrix(basis.T @ A.matrix @ basis)

"""Finite-difference assembly of the Hamiltonian and the CAP operator.

The kinetic part of each particle is assembled in divergence form
``-(1/2m) div(G grad)`` on that particle's own ``d``-dimensional grid and then
embedded in the many-body grid with Kronecker products.  Undistorted
operators use ``G = I``; distorted ones reuse the same builder with a complex
symmetric ``G`` (see :mod:`capstark.distortion.operator`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .grid import Grid
from .potentials import PotentialSpec
from .system import ParticleSystem


@dataclass(frozen=True)
class OperatorMatrix:
    """Sparse square matrix on a grid together with a descriptor.

    ``kind`` is one of ``"P"``, ``"P_eps"``, ``"P_eps_theta"``, ``"K_R"`` or
    ``"dilated"``; ``params`` records the parameters that produced it.
    """

    matrix: sp.csr_matrix
    grid: Grid
    kind: str = "P"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix)
        if m.shape != (self.grid.size, self.grid.size):
            raise ValueError(f"matrix shape {m.shape} does not match grid size {self.grid.size}")
        m.sort_indices()
        object.__setattr__(self, "matrix", m)

    @property
    def dimension(self) -> int:
        return self.grid.size

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def with_matrix(self, matrix, kind=None, **params) -> "OperatorMatrix":
        return OperatorMatrix(matrix, self.grid, kind or self.kind, {**self.params, **params})

    def __matmul__(self, x):
        return self.matrix @ x


# ---------------------------------------------------------------- stencils

def forward_difference(n: int, h: float) -> sp.csr_matrix:
    """``(n+1, n)`` forward difference with zero values just outside the box."""
    # row r holds (u_r - u_{r-1}) / h for r = 0..n
    D = sp.diags([np.full(n, 1.0), np.full(n, -1.0)], [0, -1], shape=(n + 1, n))
    return sp.csr_matrix(D / h)


def central_difference(n: int, h: float) -> sp.csr_matrix:
    """``(n, n)`` central difference with zero values just outside the box."""
    return sp.csr_matrix(sp.diags([np.full(n - 1, 0.5), np.full(n - 1, -0.5)], [1, -1], shape=(n, n)) / h)


def second_difference(n: int, h: float, order: int = 2) -> sp.csr_matrix:
    """Dirichlet approximation to ``d^2/dx^2`` of order 2 or 4."""
    if order == 2:
        c = np.array([1.0, -2.0, 1.0])
    elif order == 4:
        c = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
    else:
        raise ValueError(f"unsupported stencil order {order}; use 2 or 4")
    w = c.size // 2
    offsets = list(range(-w, w + 1))
    diags = [np.full(n - abs(k), c[k + w]) for k in offsets]
    return sp.csr_matrix(sp.diags(diags, offsets, shape=(n, n)) / h**2)


def _embed_axis(op, shape, axis):
    """Apply a 1D operator along ``axis`` of a C-ordered tensor grid."""
    left = int(np.prod(shape[:axis]))
    right = int(np.prod(shape[axis + 1:]))
    return sp.kron(sp.kron(sp.identity(left, format="csr"), op), sp.identity(right, format="csr"), format="csr")


def embed_particle(op, grid: Grid, j: int, d: int) -> sp.csr_matrix:
    """Embed an operator acting on particle ``j``'s coordinates into the full grid."""
    left = int(np.prod(grid.shape[: j * d]))
    right = int(np.prod(grid.shape[(j + 1) * d:]))
    return sp.kron(sp.kron(sp.identity(left, format="csr"), sp.csr_matrix(op)),
                   sp.identity(right, format="csr"), format="csr")


# ----------------------------------------------------------------- kinetic

MetricFn = Callable[[np.ndarray], np.ndarray]
"""Maps points of shape ``(M, d)`` to coefficient matrices of shape ``(M, d, d)``."""


def divergence_form(pgrid: Grid, mass: float, metric: MetricFn | None = None) -> sp.csr_matrix:
    """Second-order flux-conservative discretization of ``-(1/2m) div(G grad)``.

    Diagonal coefficients ``G_aa`` are sampled at staggered half points and
    act between forward differences; mixed coefficients ``G_ab`` are sampled at
    nodes and act between central differences.  With ``metric=None`` (``G=I``)
    this is the standard three-point Laplacian.  The result is (complex)
    symmetric whenever ``G`` is.
    """
    d = pgrid.ndim
    shape = pgrid.shape
    total = None
    for a in range(d):
        ax = pgrid.axes[a]
        Dp = _embed_axis(forward_difference(ax.n, ax.h), shape, a)
        if metric is None:
            g = np.ones(Dp.shape[0])
        else:
            g = metric(_staggered_points(pgrid, a))[:, a, a]
        term = Dp.T @ sp.diags(g) @ Dp
        total = term if total is None else total + term
    if metric is not None and d > 1:
        Gn = metric(pgrid.coords)
        Dc = [_embed_axis(central_difference(ax.n, ax.h), shape, a) for a, ax in enumerate(pgrid.axes)]
        for a in range(d):
            for b in range(d):
                if a != b:
                    total = total + Dc[a].T @ sp.diags(Gn[:, a, b]) @ Dc[b]
    return sp.csr_matrix(total / (2.0 * mass))


def _staggered_points(pgrid: Grid, axis: int) -> np.ndarray:
    """Half points along ``axis`` (including the two just outside the box), C-ordered."""
    pts = [ax.points for ax in pgrid.axes]
    ax = pgrid.axes[axis]
    pts[axis] = ax.lo - 0.5 * ax.h + ax.h * np.arange(ax.n + 1)
    mesh = np.meshgrid(*pts, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def laplacian_kinetic(pgrid: Grid, mass: float, order: int = 2) -> sp.csr_matrix:
    """``-(1/2m) Laplacian`` on a particle grid, order 2 or 4."""
    if order == 2:
        return divergence_form(pgrid, mass)
    total = None
    for a, ax in enumerate(pgrid.axes):
        term = _embed_axis(second_difference(ax.n, ax.h, order), pgrid.shape, a)
        total = term if total is None else total + term
    return sp.csr_matrix(-total / (2.0 * mass))


def kinetic_matrix(system: ParticleSystem, grid: Grid, order: int = 2) -> sp.csr_matrix:
    """Sum over particles of the embedded kinetic operators."""
    _check_grid(system, grid)
    total = sp.csr_matrix((grid.size, grid.size))
    for j in range(system.N):
        T = laplacian_kinetic(grid.particle_grid(j, system.d), system.masses[j], order)
        total = total + embed_particle(T, grid, j, system.d)
    return total


# --------------------------------------------------------------- potentials

def potential_diagonal(system: ParticleSystem, pot: PotentialSpec, positions: list[np.ndarray],
                       stark: list[np.ndarray] | None = None) -> np.ndarray:
    """Nodewise ``sum_j V_j(y_j) + q_j s_j + sum_{j<k} V_jk(y_j - y_k)``.

    ``positions[j]`` holds particle ``j``'s (possibly complex) coordinates at
    every node, shape ``(size, d)``; ``stark[j]`` is the field coordinate,
    defaulting to ``positions[j][:, 0]``.
    """
    if pot.N != system.N:
        raise ValueError(f"potential has {pot.N} one-body terms, system has N={system.N}")
    diag = 0.0
    for j in range(system.N):
        s = positions[j][:, 0] if stark is None else stark[j]
        diag = diag + pot.one_body[j](positions[j]) + system.couplings[j] * s
    for (j, k), V in pot.pair.items():
        if k >= system.N:
            raise ValueError(f"pair index ({j}, {k}) out of range for N={system.N}")
        diag = diag + V(positions[j] - positions[k])
    diag = np.asarray(diag)
    if not np.all(np.isfinite(diag)):
        bad = int(np.flatnonzero(~np.isfinite(diag))[0])
        raise ValueError(f"non-finite potential value at grid node {bad}")
    return diag


def _check_grid(system: ParticleSystem, grid: Grid):
    if grid.ndim != system.ndim:
        raise ValueError(f"grid dimension {grid.ndim} does not match d*N = {system.ndim}")


def assemble_hamiltonian(system: ParticleSystem, pot: PotentialSpec, grid: Grid,
                         order: int = 2) -> OperatorMatrix:
    """Discretize ``P`` with Dirichlet conditions on the grid box.

    Parameters
    ----------
    system, pot, grid
        Physical system, potentials and tensor grid (``grid.ndim == d*N``).
    order
        Finite-difference order of the kinetic stencil, 2 (default) or 4.
    """
    _check_grid(system, grid)
    T = kinetic_matrix(system, grid, order)
    pos = [grid.particle_coords(j, system.d) for j in range(system.N)]
    diag = potential_diagonal(system, pot, pos)
    if np.iscomplexobj(diag):
        if np.max(np.abs(diag.imag), initial=0.0) > 0:
            raise ValueError("potential returned complex values at real nodes")
        diag = diag.real
    return OperatorMatrix(T + sp.diags(diag), grid, "P", {"order": order})


def assemble_cap(P: OperatorMatrix, eps: float, grid: Grid) -> OperatorMatrix:
    """Return ``P - i*eps*diag(|x|^2)`` on the same grid."""
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    if grid != P.grid:
        raise ValueError("operator was assembled on a different grid")
    if eps == 0:
        return P.with_matrix(P.matrix, kind="P_eps", eps=0.0)
    r2 = np.sum(grid.coords**2, axis=1)
    M = P.matrix.astype(complex) - 1j * eps * sp.diags(r2)
    return P.with_matrix(M, kind="P_eps", eps=float(eps))

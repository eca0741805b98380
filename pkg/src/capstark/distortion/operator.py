"""The distortion map and assembly of the distorted CAP operator.

For one particle the conjugated kinetic operator is
``-(1/2m) div(G grad) + r`` with ``G = (d Phi)^-2`` (complex symmetric since
``d Phi = I + theta * hess F``).  The zeroth-order remainder ``r`` is fixed by
the requirement that the operator annihilates ``s = det(d Phi)^(1/2)``: the
undistorted kinetic operator kills constants, and conjugation by
``det^(1/2)`` maps the constant function to ``s``.  It is computed here with
the same discrete divergence-form operator, applied to ``s`` sampled on the
grid plus one ghost layer, so that the discrete operator annihilates the
discrete ``s`` exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..model.grid import Axis, Grid
from ..model.operators import (OperatorMatrix, assemble_cap, assemble_hamiltonian, divergence_form,
                               embed_particle, potential_diagonal)
from ..model.potentials import PotentialSpec
from ..model.system import ParticleSystem
from .field import DistortionField


SINGULAR_DET = 1e-8


@dataclass(frozen=True)
class Theta:
    """Complex distortion strength; ``Theta.depth(delta)`` gives ``-i*delta``."""

    value: complex = 0j

    @classmethod
    def depth(cls, delta: float) -> "Theta":
        return cls(-1j * float(delta))

    def __complex__(self):
        return complex(self.value)

    @property
    def conj(self) -> "Theta":
        return Theta(complex(self.value).conjugate())

    def check(self, field: DistortionField, delta0: float | None = None, probes=None,
              margin: float = 1e-3) -> float:
        """Validate admissibility and return ``min |det(I + theta * dv)|`` over the probes.

        Raises
        ------
        ValueError
            If ``|Im theta|`` exceeds ``delta0 / sqrt(1 + kappa**-2)`` or the
            map degenerates at a probe.
        """
        th = complex(self.value)
        if delta0 is not None and abs(th.imag) >= delta0 / field.bound:
            raise ValueError(f"|Im theta| = {abs(th.imag)} must be below delta0/c = {delta0 / field.bound}")
        if probes is None:
            return 1.0
        Jv = field.jacobian(np.asarray(probes, dtype=float).reshape(-1, field.d))
        det = np.linalg.det(np.eye(field.d) + th * Jv)
        worst = float(np.min(np.abs(det), initial=np.inf))
        if worst < margin:
            raise ValueError(f"distortion map degenerates: min |det dPhi| = {worst:.3e}")
        return worst


def phi_map(y, field: DistortionField, theta: Theta | complex) -> np.ndarray:
    """``y + theta * v(y)`` at points of shape ``(..., d)``."""
    th = complex(theta)
    y = np.asarray(y, dtype=float)
    if th == 0:
        return y.astype(complex)
    return y + th * field.v(y)


def many_body_phi_map(x, field: DistortionField, theta, d: int) -> np.ndarray:
    """Apply :func:`phi_map` to every particle block of ``x`` (shape ``(..., d*N)``)."""
    x = np.asarray(x, dtype=float)
    N = x.shape[-1] // d
    return np.concatenate([phi_map(x[..., j * d:(j + 1) * d], field, theta) for j in range(N)], axis=-1)


def _metric(field: DistortionField, theta: complex):
    eye = np.eye(field.d)

    def G(points):
        Dphi = eye + theta * field.jacobian(points)
        inv = np.linalg.inv(Dphi)
        g = inv @ inv
        return 0.5 * (g + np.swapaxes(g, -1, -2))
    return G


def _extended(pgrid: Grid) -> Grid:
    return Grid(tuple(Axis(a.lo - a.h, a.hi + a.h, a.n + 2) for a in pgrid.axes))


def _interior_index(pgrid: Grid) -> np.ndarray:
    ext = tuple(n + 2 for n in pgrid.shape)
    idx = np.meshgrid(*(np.arange(1, n + 1) for n in pgrid.shape), indexing="ij")
    return np.ravel_multi_index(tuple(i.ravel() for i in idx), ext)


def distorted_kinetic(pgrid: Grid, mass: float, field: DistortionField, theta: complex):
    """Divergence-form kinetic matrix and the remainder ``r`` on one particle grid."""
    G = _metric(field, theta)
    T = divergence_form(pgrid, mass, G)
    ext = _extended(pgrid)
    Dphi = np.eye(field.d) + theta * field.jacobian(ext.coords)
    det = np.linalg.det(Dphi)
    if np.min(np.abs(det)) < SINGULAR_DET:
        k = int(np.argmin(np.abs(det)))
        raise ValueError(f"distortion map is singular at node {ext.coords[k]} (|det dPhi| = {abs(det[k]):.3e}); "
                         "theta is outside the admissible range")
    s = np.sqrt(det)
    Ts = divergence_form(ext, mass, G) @ s
    inner = _interior_index(pgrid)
    r = -Ts[inner] / s[inner]
    return T, r


class DistortedFactory:
    """Precomputed ``P_{0,theta}`` plus the distorted CAP weight, for fast ``eps`` sweeps.

    Calling the factory with ``eps`` returns ``P_{eps,theta}``; the arithmetic
    is identical to :func:`assemble_distorted`.
    """

    def __init__(self, system: ParticleSystem, pot: PotentialSpec, grid: Grid, field: DistortionField | None,
                 theta: Theta | complex, order: int = 2, check_region: bool = True):
        th = complex(theta)
        self.system, self.pot, self.grid, self.field, self.theta = system, pot, grid, field, th
        if th == 0:
            self._P = assemble_hamiltonian(system, pot, grid, order)
            self._weight = np.sum(grid.coords**2, axis=1)
            return
        if order != 2:
            raise NotImplementedError("distorted operators are assembled with second-order stencils only")
        if grid.ndim != system.ndim:
            raise ValueError(f"grid dimension {grid.ndim} does not match d*N = {system.ndim}")
        if field is None or field.d != system.d:
            raise ValueError("a distortion field of the particle dimension is required")
        d = system.d
        total = sp.csr_matrix((grid.size, grid.size), dtype=complex)
        rdiag = np.zeros(grid.size, dtype=complex)
        cache = {}
        for j in range(system.N):
            pg = grid.particle_grid(j, d)
            key = (pg, system.masses[j])
            if key not in cache:
                cache[key] = distorted_kinetic(pg, system.masses[j], field, th)
            T, r = cache[key]
            total = total + embed_particle(T, grid, j, d)
            rdiag = rdiag + embed_particle(sp.diags(r), grid, j, d).diagonal()
        pos, stark = [], []
        pcache = {}
        for j in range(system.N):
            pg = grid.particle_grid(j, d)
            if pg not in pcache:
                pcache[pg] = phi_map(pg.coords, field, th)
            xt = _broadcast_particle(pcache[pg], grid, j, d)
            pos.append(xt)
            stark.append(xt[:, 0])
        if check_region:
            _check_region(pot, pos)
        diag = potential_diagonal(system, pot, pos, stark) + rdiag
        self._P = OperatorMatrix(total + sp.diags(diag), grid, "P_eps_theta", {"theta": th, "eps": 0.0})
        self._weight = np.sum([np.sum(p * p, axis=1) for p in pos], axis=0)

    @property
    def cap_weight(self) -> np.ndarray:
        """Nodewise ``x_theta . x_theta`` (bilinear, not ``|x_theta|^2``)."""
        return self._weight

    def __call__(self, eps: float) -> OperatorMatrix:
        if self.theta == 0 and eps >= 0:
            return assemble_cap(self._P, eps, self.grid)
        M = self._P.matrix.astype(complex) - 1j * eps * sp.diags(self._weight)
        return OperatorMatrix(M, self.grid, "P_eps_theta", {"theta": self.theta, "eps": float(eps)})


def _broadcast_particle(values, grid: Grid, j: int, d: int) -> np.ndarray:
    """Lift per-particle-node values ``(M, ...)`` to all nodes of the full grid."""
    left = int(np.prod(grid.shape[: j * d]))
    right = int(np.prod(grid.shape[(j + 1) * d:]))
    idx = np.tile(np.repeat(np.arange(values.shape[0]), right), left)
    return values[idx]


def _check_region(pot: PotentialSpec, pos):
    reg = pot.region
    for j, xt in enumerate(pos):
        im = np.linalg.norm(xt.imag, axis=1)
        moved = im > 0
        if np.any(moved & ((np.linalg.norm(xt.real, axis=1) <= reg.R0) | (im >= reg.delta0))):
            raise ValueError(f"particle {j}: distorted coordinates leave the analyticity region "
                             f"(|Re y| > {reg.R0}, |Im y| < {reg.delta0})")
    for (j, k) in pot.pair:
        im = np.linalg.norm((pos[j] - pos[k]).imag, axis=1)
        if np.any(im >= reg.delta0):
            raise ValueError(f"pair ({j}, {k}): |Im(x_j - x_k)| reaches {im.max():.3g} >= delta0 = {reg.delta0}")


def assemble_distorted(system: ParticleSystem, pot: PotentialSpec, grid: Grid, field: DistortionField | None,
                       theta: Theta | complex, eps: float, order: int = 2, check_region: bool = True) -> OperatorMatrix:
    """Discretize the distorted CAP operator ``P_{eps,theta}``.

    Parameters
    ----------
    system, pot, grid
        As for :func:`capstark.model.assemble_hamiltonian`.
    field
        Distortion field (unused when ``theta == 0``).
    theta
        Distortion strength; ``theta = 0`` reproduces
        ``assemble_cap(assemble_hamiltonian(...), eps)`` exactly.
    eps
        CAP strength.  Negative values are accepted so that the adjoint
        ``P_{-eps, conj(theta)}`` can be formed.
    check_region
        Verify that distorted coordinates stay inside the declared
        analyticity region of the potentials.
    """
    return DistortedFactory(system, pot, grid, field, theta, order, check_region)(eps)

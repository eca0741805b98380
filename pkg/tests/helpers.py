"""Shared constructions for the test modules."""
import numpy as np
import scipy.linalg as la

from capstark.distortion import assemble_distorted, default_field, phi_map
from capstark.model import AnalyticRegion, Grid, ParticleSystem, PotentialSpec, assemble_hamiltonian, make_potential


def gauge_gap(n, theta, lo=-12.0, hi=8.0):
    """Eigenvalue gap in [-6, 0] between the real-theta distorted operator and P.

    Dirichlet zeros sit one cell outside the box, so ``P`` is discretized
    with walls at their images under the map.  Returns the maximum gap, the
    change of those eigenvalues of ``P`` under refinement (its discretization
    error) and the number of eigenvalues compared.
    """
    s = ParticleSystem.identical(1, 1)
    pot = PotentialSpec.uniform(1, make_potential("gaussian_well", depth=5.0), region=AnalyticRegion(4.0, 1.0))
    fld = default_field(hi - lo, 1, 4.0)
    h = (hi - lo) / (n - 1)
    A = assemble_distorted(s, pot, Grid.uniform(lo, hi, n), fld, theta, 0.0).toarray()
    a_wall = float(phi_map(np.array([[lo - h]]), fld, theta).real[0, 0])
    b_wall = float(phi_map(np.array([[hi + h]]), fld, theta).real[0, 0])

    def p_eigs(a, b, m):
        hp = (b - a) / (m + 1)
        return np.sort(la.eigvalsh(assemble_hamiltonian(s, pot, Grid.uniform(a + hp, b - hp, m)).toarray()))

    ev_p = p_eigs(a_wall, b_wall, n)
    ev_a = np.sort(la.eigvals(A).real)
    idx = np.flatnonzero((ev_p > -6) & (ev_p < 0))
    disc = np.max(np.abs(p_eigs(a_wall, b_wall, 2 * n + 1)[idx] - ev_p[idx]))
    return float(np.max(np.abs(ev_a[idx] - ev_p[idx]))), float(disc), len(idx)


def planted_jordan(rng, blocks, n, fill_center=5.0, fill_radius=3.0):
    """Matrix similar to a Jordan form with the given (eigenvalue, size) blocks.

    Remaining diagonal entries lie on the circle ``|z - fill_center| = fill_radius``.
    The similarity is a random perturbation of the identity.
    """
    J = np.zeros((n, n), dtype=complex)
    k = 0
    for lam, size in blocks:
        for i in range(size):
            J[k + i, k + i] = lam
            if i + 1 < size:
                J[k + i, k + i + 1] = 1.0
        k += size
    for i in range(k, n):
        J[i, i] = fill_center + fill_radius * np.exp(2j * np.pi * rng.uniform())
    S = np.eye(n) + 0.3 * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(n)
    return S @ J @ np.linalg.inv(S)

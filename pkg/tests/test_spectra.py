import json

import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from capstark.distortion import Theta, assemble_distorted, default_field
from capstark.model import AnalyticRegion, Grid, ParticleSystem, PotentialSpec, make_potential
from helpers import planted_jordan
from capstark.spectra import (ContourProximityError, EigConfig, RankGapError, SpectralWindow, contour_multiplicity,
                              eigs_to_json, eigs_in_window, min_singular_value, write_eigs_csv)


def random_complex(rng, n):
    return rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))


# ---------------------------------------------------------------- windows

def test_window_validation():
    with pytest.raises(ValueError):
        SpectralWindow(1, 0, -1, 1)
    with pytest.raises(ValueError):
        SpectralWindow(0, 1, -0.5, 1, delta1=0.3)
    with pytest.raises(ValueError):
        SpectralWindow(0, 1, -0.5, 1, delta0=0.5)
    w = SpectralWindow(0, 1, -0.3, 1, delta1=0.3, delta0=1.0)
    assert w.contains(0.5 + 0.0j) and not w.contains(0.5 - 0.3j)


def test_diagonal_window_example():
    A = np.diag([1, 2, 3 + 0.1j])
    got = eigs_in_window(A, SpectralWindow(1.5, 3.5, -1, 1))
    np.testing.assert_allclose(np.sort_complex(got.values), [2, 3 + 0.1j])
    assert all(p.residual < 1e-12 for p in got)
    assert len(eigs_in_window(A, SpectralWindow(-10, -5, -1, 1))) == 0


def test_random_matrix_matches_dense_filter(rng):
    A = random_complex(rng, 50)
    w = SpectralWindow(-3, 3, -2, 4)
    ref = la.eigvals(A)
    ref = np.sort_complex(ref[w.contains(ref)])
    got = np.sort_complex(eigs_in_window(A, w).values)
    np.testing.assert_allclose(got, ref, atol=1e-10)


def test_shift_invert_path_matches_dense(rng):
    n = 400
    A = sp.diags([rng.standard_normal(n) + 1j * rng.standard_normal(n), np.ones(n - 1), np.ones(n - 1)],
                 [0, 1, -1], format="csr")
    w = SpectralWindow(-1, 1, -0.5, 0.5)
    dense = eigs_in_window(A, w)
    sparse = eigs_in_window(A, w, EigConfig(dense_threshold=10))
    np.testing.assert_allclose(np.sort_complex(sparse.values), np.sort_complex(dense.values), atol=1e-8)
    for p in sparse:
        assert abs(np.linalg.norm(p.vector) - 1.0) < 1e-12
        assert p.residual < 1e-8


def test_eigenvalues_of_distorted_adjoint_pair_are_conjugate():
    s = ParticleSystem.identical(1, 1)
    pot = PotentialSpec.uniform(1, make_potential("gaussian_well", depth=5.0), region=AnalyticRegion(4.0, 1.0))
    g = Grid.uniform(-30, 15, 150)
    fld = default_field(45.0, 1, 4.0)
    th = Theta.depth(0.4)
    a = la.eigvals(assemble_distorted(s, pot, g, fld, th, 0.01).toarray())
    b = la.eigvals(assemble_distorted(s, pot, g, fld, th.conj, -0.01).toarray())
    np.testing.assert_allclose(np.sort_complex(np.conj(b)), np.sort_complex(a), atol=1e-8)


def test_edge_density_warning():
    A = np.diag(np.linspace(0, 1, 100) - 0.99j)
    with pytest.warns(RuntimeWarning, match="continuum"):
        got = eigs_in_window(A, SpectralWindow(-1, 2, -1, 1), EigConfig(edge_density=20))
    assert got.warnings


def test_eig_output_formats(tmp_path):
    pairs = eigs_in_window(np.diag([1.0, 2.0 + 0.5j]), SpectralWindow(0, 3, -1, 1))
    path = tmp_path / "e.csv"
    write_eigs_csv(path, pairs, source="oracle")
    lines = path.read_text().splitlines()
    assert lines[0].split(",")[:3] == ["re", "im", "residual"]
    assert len(lines) == 3
    data = json.loads(eigs_to_json(pairs, source="oracle"))
    assert data[0]["source"] == "oracle"


# ---------------------------------------------------------------- multiplicity

def test_multiplicity_examples():
    assert contour_multiplicity(np.diag([1.0, 2.0, 2.0]), 2.0, 0.5).count == 2
    lam = 1 + 0.5j
    J = np.array([[lam, 1], [0, lam]])
    m = contour_multiplicity(J, lam, 0.3)
    assert m.count == 2 and m.accepted
    assert contour_multiplicity(np.diag([1.0, 2.0]), 5.0, 0.5).count == 0


def test_contour_through_eigenvalue_is_rejected():
    # two nodes sit at +-i
    with pytest.raises(ContourProximityError):
        contour_multiplicity(np.diag([1j, 2.0]), 0.0, 1.0, n_nodes=2)


def test_nodes_refine_near_contour():
    A = np.diag([0.0, 1.05])
    m = contour_multiplicity(A, 0.0, 1.0)
    assert m.count == 1 and m.quadrature_nodes > 32


def test_ambiguous_rank_is_rejected():
    A = np.diag([0.0, 1.0001])
    with pytest.raises(RankGapError):
        contour_multiplicity(A, 0.0, 1.0, max_nodes=64)
    assert contour_multiplicity(A, 0.0, 1.0, max_nodes=64, strict=False).rank_gap <= 1e3


@given(st.integers(0, 2**32 - 1))
def test_planted_jordan_structure(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(8, 30))
    lam = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
    sizes = [int(s) for s in rng.integers(1, 3, size=int(rng.integers(1, 3)))]
    A = planted_jordan(rng, [(lam, s) for s in sizes], n)
    m = contour_multiplicity(A, lam, 0.5)
    assert m.count == sum(sizes)
    assert m.rank_gap > 1e3


def test_count_matches_window_eigenpairs(rng):
    for _ in range(10):
        A = random_complex(rng, 30) / 3
        ev = la.eigvals(A)
        c = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        r = 0.8
        if np.min(np.abs(np.abs(ev - c) - r)) < 0.02:
            continue
        assert contour_multiplicity(A, c, r).count == int(np.sum(np.abs(ev - c) < r))


def test_sketched_projector_large_matrix(rng):
    n = 700
    d = np.concatenate([[0.1 + 0.1j, 0.1 + 0.1j, -0.2j], 3 + rng.uniform(size=n - 3)])
    A = sp.diags([d, 0.01 * np.ones(n - 1)], [0, 1], format="csr")
    m = contour_multiplicity(A, 0.0, 0.5, sketch=4)
    assert m.count == 3


# ---------------------------------------------------------------- singular values

def test_min_singular_value_examples(rng):
    assert min_singular_value(np.eye(5), 0.0) == pytest.approx(1.0)
    assert min_singular_value(np.diag([1.0, 3.0]), 2.0) == pytest.approx(1.0)
    A = random_complex(rng, 40)
    z = complex(rng.standard_normal(), rng.standard_normal())
    ref = la.svdvals(A - z * np.eye(40))[-1]
    assert min_singular_value(A, z) == pytest.approx(ref, abs=1e-10)


def test_min_singular_value_sparse_path(rng):
    n = 900
    A = sp.diags([rng.standard_normal(n) + 2j, np.ones(n - 1)], [0, 1], format="csr")
    z = 0.3 + 1.0j
    ref = la.svdvals(A.toarray() - z * np.eye(n))[-1]
    assert min_singular_value(A, z, dense_threshold=100) == pytest.approx(ref, rel=1e-8)


@given(st.integers(0, 2**32 - 1))
def test_min_singular_value_bounds(seed):
    rng = np.random.default_rng(seed)
    d = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    z = complex(rng.standard_normal(), rng.standard_normal())
    # normal matrix: the smallest singular value is the eigenvalue distance
    assert min_singular_value(np.diag(d), z) <= np.min(np.abs(d - z)) + 1e-12
    A = random_complex(rng, 12)
    for lam in la.eigvals(A):
        assert min_singular_value(A, lam) < 1e-10

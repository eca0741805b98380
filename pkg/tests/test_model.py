import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from capstark.model import (AnalyticRegion, Grid, OperatorMatrix, ParticleSystem, PotentialSpec, SamplingPlan,
                            assemble_cap, assemble_hamiltonian, make_potential, restrict, sector_basis,
                            sector_projector, validate_assumption)
from capstark.model.grid import Axis
from capstark.model.potentials import REGISTRY, Constant, Zero
from capstark.model.symmetry import basis_from_shape


def one_body(V, N=1, pair=None, region=None):
    return PotentialSpec.uniform(N, V, pair, region)


# ---------------------------------------------------------------- system and grid

def test_system_rejects_bad_parameters():
    with pytest.raises(ValueError):
        ParticleSystem(1, 1, (0.0,), (1.0,))
    with pytest.raises(ValueError):
        ParticleSystem(1, 1, (1.0,), (-1.0,))
    with pytest.raises(ValueError):
        ParticleSystem(0, 1, (), ())
    with pytest.raises(ValueError):
        ParticleSystem(2, 1, (1.0,), (1.0, 1.0))


def test_normalized_system_needs_unit_minimum_coupling():
    ParticleSystem(2, 1, (1.0, 1.0), (1.0, 3.0), normalized=True)
    with pytest.raises(ValueError):
        ParticleSystem(2, 1, (1.0, 1.0), (2.0, 3.0), normalized=True)


def test_desk_scale_cap_and_override():
    with pytest.raises(ValueError, match="desk-scale"):
        ParticleSystem.identical(2, 2)
    assert ParticleSystem.identical(2, 2, allow_large=True).ndim == 4


def test_axis_needs_three_points():
    with pytest.raises(ValueError):
        Axis(0.0, 1.0, 2)
    with pytest.raises(ValueError):
        Axis(1.0, 0.0, 5)


@given(st.lists(st.integers(3, 6), min_size=1, max_size=3), st.data())
def test_flat_index_round_trip(ns, data):
    g = Grid(tuple(Axis(-1.0, 1.0 + i, n) for i, n in enumerate(ns)))
    flat = data.draw(st.integers(0, g.size - 1))
    multi = g.multi_index(flat)
    assert g.flat_index(multi) == flat
    expect = [ax.points[m] for ax, m in zip(g.axes, multi)]
    np.testing.assert_allclose(g.coords[flat], expect)


def test_grid_spacing_and_particle_major_axes():
    g = Grid((Axis(-1, 1, 5), Axis(0, 2, 3), Axis(-2, 2, 9)))
    assert g.spacing == (0.5, 1.0, 0.5)
    assert g.size == 5 * 3 * 9
    assert g.particle_axes(1, 1) == (g.axes[1],)


def test_enlarged_grid_keeps_spacing():
    g = Grid.uniform(-10.0, 5.0, 151)
    big = g.enlarged(1.5)
    assert big.axes[0].h == pytest.approx(g.axes[0].h)
    assert big.axes[0].hi - big.axes[0].lo >= 1.5 * 15.0 - 1e-9
    assert big.axes[0].lo < g.axes[0].lo and big.axes[0].hi > g.axes[0].hi


# ---------------------------------------------------------------- potentials

@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_potentials_are_real_on_real_points(name, rng):
    V = make_potential(name)
    y = rng.uniform(-5, 5, size=(50, 2))
    vals = np.asarray(V(y))
    assert vals.shape == (50,)
    assert np.all(np.isfinite(vals))
    assert not np.iscomplexobj(vals) or np.max(np.abs(vals.imag)) == 0


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_potentials_obey_reflection(name, rng):
    V = make_potential(name)
    y = rng.uniform(-5, 5, size=(40, 1)) + 1j * rng.uniform(-0.3, 0.3, size=(40, 1))
    np.testing.assert_allclose(np.conj(V(y)), V(np.conj(y)), rtol=1e-12, atol=1e-14)


def test_cosine_damped_negative_square_branch():
    V = make_potential("cosine_damped", amplitude=1.0, wavenumber=2.0, width=3.0)
    y = np.array([[0.5 + 0.0j]])
    y_imag = np.array([[0.5j]])
    assert V(y)[0] == pytest.approx(np.cos(1.0) * np.exp(-0.25 / 9.0))
    assert V(y_imag)[0] == pytest.approx(np.cosh(1.0) * np.exp(0.25 / 9.0))


def test_unknown_potential_name():
    with pytest.raises(ValueError, match="unknown potential"):
        make_potential("coulomb")


def test_pair_index_order_is_checked():
    with pytest.raises(ValueError):
        PotentialSpec((Zero(), Zero()), {(1, 0): Zero()})


# ---------------------------------------------------------------- assembly

def test_spec_stencil_example():
    h = 0.25
    g = Grid((Axis(-h, h, 3),))
    P = assemble_hamiltonian(ParticleSystem(1, 1, (0.5,), (1.0,)), one_body(Zero()), g).toarray()
    np.testing.assert_allclose(np.diag(P), [2 / h**2 - h, 2 / h**2, 2 / h**2 + h], rtol=1e-14)
    np.testing.assert_allclose(np.diag(P, 1), -1 / h**2, rtol=1e-14)
    np.testing.assert_allclose(np.diag(P, -1), -1 / h**2, rtol=1e-14)


@given(st.floats(-3, 3))
def test_constant_shift_moves_every_eigenvalue(c):
    s = ParticleSystem.identical(1, 1)
    g = Grid.uniform(-6, 6, 40)
    base = la.eigvalsh(assemble_hamiltonian(s, one_body(make_potential("gaussian_well")), g).toarray())
    shifted_pot = PotentialSpec((lambda y, V=make_potential("gaussian_well"): V(y) + c,))
    shifted = la.eigvalsh(assemble_hamiltonian(s, shifted_pot, g).toarray())
    np.testing.assert_allclose(shifted, base + c, atol=1e-10)


def test_pair_potential_matches_dense_loop():
    s = ParticleSystem.identical(2, 1)
    g = Grid.uniform(-2, 2, 7, ndim=2)
    pair = lambda y: np.exp(-np.sum(y * y, axis=-1))  # noqa: E731
    P = assemble_hamiltonian(s, PotentialSpec((Zero(), Zero()), {(0, 1): pair}), g).toarray()
    P0 = assemble_hamiltonian(s, PotentialSpec((Zero(), Zero())), g).toarray()
    x = g.axes[0].points
    for i in range(7):
        for k in range(7):
            idx = g.flat_index((i, k))
            assert P[idx, idx] - P0[idx, idx] == pytest.approx(np.exp(-(x[i] - x[k]) ** 2), abs=1e-14)


def test_undistorted_hamiltonian_is_real_symmetric():
    s = ParticleSystem.identical(2, 1)
    g = Grid.uniform(-3, 3, 9, ndim=2)
    pot = PotentialSpec.uniform(2, make_potential("soft_core"), make_potential("gaussian_well", depth=-1.0))
    A = assemble_hamiltonian(s, pot, g).matrix
    assert not np.iscomplexobj(A.data)
    assert abs(A - A.T).max() == 0


def test_free_stark_box_eigenvalues_are_real():
    s = ParticleSystem.identical(1, 1)
    A = assemble_hamiltonian(s, one_body(Zero()), Grid.uniform(-10, 10, 80)).toarray()
    ev = la.eigvals(A)
    assert np.max(np.abs(ev.imag)) < 1e-10


def test_dimension_mismatch_and_non_finite_values():
    s = ParticleSystem.identical(1, 1)
    with pytest.raises(ValueError, match="dimension"):
        assemble_hamiltonian(s, one_body(Zero()), Grid.uniform(-1, 1, 4, ndim=2))
    bad = PotentialSpec((lambda y: np.where(y[..., 0] == 0, np.inf, 1.0),))
    with pytest.raises(ValueError, match="non-finite"):
        assemble_hamiltonian(s, bad, Grid.uniform(-1, 1, 5))


def test_fourth_order_kinetic_converges_faster():
    # negligible field so the ground state sits in the well, away from the walls
    s = ParticleSystem.identical(1, 1, coupling=1e-9)
    pot = one_body(make_potential("gaussian_well", depth=5.0))
    errs = {}
    for order in (2, 4):
        vals = []
        for n in (100, 200):
            A = assemble_hamiltonian(s, pot, Grid.uniform(-8, 8, n), order=order).toarray()
            vals.append(la.eigvalsh(A)[0])
        errs[order] = abs(vals[1] - vals[0])
    assert errs[4] < 0.1 * errs[2]


def test_cap_examples():
    s = ParticleSystem(1, 1, (0.5,), (1.0,))
    g = Grid((Axis(-1.0, 1.0, 3),))
    P = assemble_hamiltonian(s, one_body(Zero()), g)
    np.testing.assert_array_equal(assemble_cap(P, 0.0, g).toarray(), P.toarray())
    corr = np.diag(assemble_cap(P, 0.5, g).toarray() - P.toarray())
    np.testing.assert_allclose(corr, [-0.5j, 0.0, -0.5j], atol=1e-15)
    with pytest.raises(ValueError):
        assemble_cap(P, -1.0, g)
    with pytest.raises(ValueError):
        assemble_cap(P, 0.1, Grid((Axis(-2.0, 2.0, 3),)))


@given(st.floats(0, 2))
def test_cap_leaves_origin_unchanged(eps):
    g = Grid.uniform(-2, 2, 5, ndim=2)
    s = ParticleSystem.identical(2, 1)
    P = assemble_hamiltonian(s, PotentialSpec.uniform(2, make_potential("gaussian_well")), g)
    A = assemble_cap(P, eps, g)
    o = g.flat_index((2, 2))
    assert A.matrix[o, o] == P.matrix[o, o]


def test_operator_matrix_shape_check():
    with pytest.raises(ValueError):
        OperatorMatrix(sp.identity(4), Grid.uniform(0, 1, 3))


# ---------------------------------------------------------------- symmetry

def test_n1_symmetric_projector_is_identity():
    s = ParticleSystem.identical(1, 1)
    g = Grid.uniform(-1, 1, 6)
    np.testing.assert_array_equal(sector_projector(s, g, "symmetric").toarray(), np.eye(6))


def test_two_point_axis_sector_dimensions():
    assert basis_from_shape(2, 2, "symmetric").shape == (4, 3)
    assert basis_from_shape(2, 2, "antisymmetric").shape == (4, 1)


@given(st.integers(3, 6), st.sampled_from(["symmetric", "antisymmetric"]))
def test_projector_algebra(n, sector):
    s = ParticleSystem.identical(2, 1)
    g = Grid.uniform(-1, 1, n, ndim=2)
    Pi = sector_projector(s, g, sector).toarray()
    assert np.max(np.abs(Pi @ Pi - Pi)) < 1e-12
    assert np.max(np.abs(Pi - Pi.T)) < 1e-12


def test_sector_dimensions_add_up_for_three_particles():
    M = 4
    sym = basis_from_shape(M, 3, "symmetric").shape[1]
    anti = basis_from_shape(M, 3, "antisymmetric").shape[1]
    assert sym == 20 and anti == 4


def test_projectors_commute_with_identical_hamiltonian():
    s = ParticleSystem.identical(2, 1)
    g = Grid.uniform(-4, 4, 12, ndim=2)
    pot = PotentialSpec.uniform(2, make_potential("gaussian_well"), make_potential("soft_core"))
    P = assemble_hamiltonian(s, pot, g).toarray()
    for sector in ("symmetric", "antisymmetric"):
        Pi = sector_projector(s, g, sector).toarray()
        assert np.linalg.norm(Pi @ P - P @ Pi) / np.linalg.norm(P) < 1e-10


def test_sector_spectra_union_equals_full_spectrum():
    s = ParticleSystem.identical(2, 1)
    g = Grid.uniform(-4, 4, 10, ndim=2)
    pot = PotentialSpec.uniform(2, make_potential("gaussian_well"), make_potential("gaussian_well", depth=-2.0))
    P = assemble_hamiltonian(s, pot, g)
    full = np.sort(la.eigvalsh(P.toarray()))
    parts = [la.eigvalsh(restrict(P, sector_basis(s, g, k)).toarray()) for k in ("symmetric", "antisymmetric")]
    np.testing.assert_allclose(np.sort(np.concatenate(parts)), full, atol=1e-10)


def test_sector_needs_identical_particles():
    s = ParticleSystem(2, 1, (1.0, 2.0), (1.0, 1.0))
    with pytest.raises(ValueError, match="identical"):
        sector_projector(s, Grid.uniform(-1, 1, 4, ndim=2), "symmetric")
    s2 = ParticleSystem.identical(2, 1)
    with pytest.raises(ValueError, match="axes"):
        sector_projector(s2, Grid((Axis(-1, 1, 4), Axis(-2, 2, 4))), "symmetric")


# ---------------------------------------------------------------- assumption screen

def test_gaussian_passes_screen():
    region = AnalyticRegion(R0=1.0, delta0=0.5, c0=1.0)
    pot = PotentialSpec((make_potential("gaussian_well", depth=-1.0),), region=region)
    rep = validate_assumption(pot, SamplingPlan.default(region, 1))
    assert rep.decay_ok and rep.real_valued and rep.ok


def test_zero_potential_report_is_zero():
    region = AnalyticRegion()
    rep = validate_assumption(PotentialSpec((Zero(),), region=region), SamplingPlan.default(region, 2))
    assert rep.max_abs == 0.0 and rep.max_grad == 0.0


def test_bound_violation_is_flagged():
    region = AnalyticRegion(R0=0.05, delta0=0.5, c0=1.0, bound=1.0)
    inv = lambda y: 1.0 / y[..., 0]  # noqa: E731
    plan = SamplingPlan(np.array([[0.5], [2.0]]), np.array([[0.1 + 0j]]), np.array([[1.0]]),
                        np.linspace(1.0, 5.0, 10))
    rep = validate_assumption(PotentialSpec((inv,), region=region), plan)
    assert rep.bound_violated and not rep.ok


def test_non_finite_in_region_probe_raises():
    region = AnalyticRegion()
    inv = lambda y: 1.0 / y[..., 0]  # noqa: E731
    plan = SamplingPlan(np.array([[0.0]]), np.zeros((0, 1), complex), np.array([[1.0]]), np.linspace(2, 4, 5))
    with pytest.raises(ValueError, match="non-finite"):
        validate_assumption(PotentialSpec((inv,), region=region), plan)


def test_constant_potential_fails_nothing_but_has_zero_gradient():
    region = AnalyticRegion()
    rep = validate_assumption(PotentialSpec((Constant(2.0),), region=region), SamplingPlan.default(region, 1))
    assert rep.max_abs == pytest.approx(2.0) and rep.max_grad == 0.0

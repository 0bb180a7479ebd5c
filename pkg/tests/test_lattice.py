import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from quadrimer.lattice import (
    SIGMA_1,
    SIGMA_2,
    Boundary,
    LatticeError,
    LatticeParams,
    Regime,
    apply_linear,
    apply_rhs,
    as_state,
    classify_regime,
    coupling_blocks,
    coupling_regime,
    linear_matrix,
    pt_conjugate,
    rotation,
)

finite = st.floats(-2, 2, allow_nan=False)


def random_state(rng, n):
    return rng.normal(size=(n, 4)) + 1j * rng.normal(size=(n, 4))


def test_coupling_blocks_are_transposes():
    for alpha in (0.0, np.pi / 6, 1.1):
        h_plus, h_minus = coupling_blocks(alpha)
        assert_allclose(h_minus, h_plus.T)
        # raising operator structure: only the upper-right 2x2 block is nonzero
        assert_allclose(h_minus, 0.5j * np.kron(SIGMA_1 + 1j * SIGMA_2, rotation(alpha)))
        assert_allclose(h_minus[:2, 2:], 1j * rotation(alpha))
        assert_allclose(h_minus[2:], 0)


@settings(max_examples=40, deadline=None)
@given(finite, finite, finite, finite, finite, st.floats(0, np.pi),
       st.integers(1, 6), st.sampled_from([Boundary.FINITE, Boundary.RING]))
def test_cellwise_matches_dense(delta, kr, ki, kpr, kpi, alpha, n, boundary):
    p = LatticeParams(delta, complex(kr, ki), complex(kpr, kpi), alpha, n, boundary)
    a = random_state(np.random.default_rng(n), n)
    assert_allclose(apply_linear(p, a).ravel(), linear_matrix(p) @ a.ravel(), atol=1e-12)


def test_ring_with_one_cell_wraps_onto_itself():
    p = LatticeParams(0.3, 0.2, 0.7, n_cells=1, boundary=Boundary.RING)
    a = random_state(np.random.default_rng(1), 1)
    assert_allclose(apply_linear(p, a).ravel(), linear_matrix(p) @ a.ravel(), atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(finite, finite, finite, st.floats(0, 2 * np.pi))
def test_rhs_gauge_covariant(delta, k, kp, theta):
    p = LatticeParams(delta, k, kp, n_cells=5)
    a = random_state(np.random.default_rng(7), 5)
    rot = np.exp(1j * theta)
    assert_allclose(apply_rhs(p, rot * a), rot * apply_rhs(p, a), atol=1e-11)


def test_pt_conjugate_squares_to_minus_one(rng):
    a = random_state(rng, 7)
    assert_allclose(pt_conjugate(pt_conjugate(a)), -a)


def test_imaginary_couplings_give_hermitian_operator():
    p = LatticeParams(0.4, 0.1j, 1.0j, n_cells=6)
    lin = linear_matrix(p)
    assert_allclose(lin, lin.conj().T, atol=1e-15)


def test_real_couplings_spectrum_closed_under_conjugation():
    p = LatticeParams(1.0, 0.1, 1.0, n_cells=8)
    ev = np.linalg.eigvals(linear_matrix(p))
    for e in ev:
        assert np.min(np.abs(ev - e.conj())) < 1e-8


def test_pt_partner_reverses_evolution(rng):
    # the partner map is antilinear and flips the direction of z
    p = LatticeParams(1.2, 0.3, 0.8, n_cells=5)
    a = random_state(rng, 5)
    assert_allclose(apply_rhs(p, pt_conjugate(a)), -pt_conjugate(apply_rhs(p, a)), atol=1e-12)


def test_zero_state_is_fixed_point():
    p = LatticeParams(1.5, 0.1, 1.0)
    assert_allclose(apply_rhs(p, np.zeros((20, 4))), 0)


def test_rhs_with_scalar_and_vector_mask(rng):
    p = LatticeParams(1.5, 0.1, 1.0, n_cells=4)
    a = random_state(rng, 4)
    assert_allclose(apply_rhs(p, a, 0.5), apply_rhs(p, a, np.full(4, 0.5)))
    assert_allclose(apply_rhs(p, a, 0.5) - apply_rhs(p, a), -0.5 * a)


@pytest.mark.parametrize("bad", [np.zeros((3, 3)), np.full((2, 4), np.nan)])
def test_as_state_rejects_bad_input(bad):
    with pytest.raises(LatticeError):
        as_state(bad)


def test_as_state_checks_cell_count():
    with pytest.raises(LatticeError):
        as_state(np.zeros((3, 4)), n_cells=4)


def test_mask_validation(rng):
    p = LatticeParams(1.5, 0.1, 1.0, n_cells=4)
    a = random_state(rng, 4)
    with pytest.raises(LatticeError):
        apply_rhs(p, a, np.ones(3))
    with pytest.raises(LatticeError):
        apply_rhs(p, a, -0.1)


def test_params_validation():
    with pytest.raises(LatticeError):
        LatticeParams(1.0, 0.1, 1.0, n_cells=0)
    with pytest.raises(LatticeError):
        LatticeParams(1.0, 0.9, 1.0, n_cells=5, boundary=Boundary.LEFT_SEMI)
    # trivial phase: no edge state to truncate
    LatticeParams(1.0, 1.0, 0.1, n_cells=2, boundary=Boundary.LEFT_SEMI)
    assert LatticeParams(1.0, 0.1, 1.0, boundary="ring").periodic


@pytest.mark.parametrize("chi_i, phis, label, topo", [
    (0.0, (np.pi / 2, -np.pi / 2), Regime.ODD_PT, "nontrivial"),
    (0.0, (np.pi / 2, np.pi / 2), Regime.ODD_PT, "trivial"),
    (0.0, (0.0, 0.0), Regime.HERMITIAN, "nontrivial"),
    (0.0, (0.0, np.pi), Regime.HERMITIAN, "trivial"),
    (0.0, (0.3, 0.0), Regime.NEITHER, None),
    (1e-3, (0.0, 0.0), Regime.NEITHER, None),
])
def test_classify_regime(chi_i, phis, label, topo):
    r = classify_regime(chi_i, *phis)
    assert r.label is label and r.topology == topo


def test_coupling_regime():
    assert coupling_regime(0.1, 1.0).label is Regime.ODD_PT
    assert coupling_regime(0.1j, 1.0j).label is Regime.HERMITIAN
    assert coupling_regime(0.1 + 0.1j, 1.0).label is Regime.NEITHER
    assert coupling_regime(1.0, 0.1).topology == "trivial"

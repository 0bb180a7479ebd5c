import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from quadrimer.bloch import hausdorff
from quadrimer.dynamics import (
    absorption_mask,
    add_noise,
    fit_growth_rate,
    integrate,
    linearization,
    propagate,
    stability_spectrum,
)
from quadrimer.lattice import Boundary, LatticeError, LatticeParams, linear_matrix, pt_conjugate
from quadrimer.stationary import Side, StationaryMode, continue_family, newton_solve


def zero_mode(params):
    return StationaryMode(np.zeros((params.n_cells, 4), dtype=complex), 0.0, 0.0)


def test_uniform_absorption_shifts_spectrum(partially_broken):
    mode = zero_mode(partially_broken)
    bare = np.linalg.eigvals(linearization(partially_broken, mode))
    damped = np.linalg.eigvals(linearization(partially_broken, mode, 0.3))
    assert hausdorff(damped, bare - 0.3) < 1e-8


def test_zero_mode_growth_equals_bulk_rate():
    # ring: the linearized spectrum about zero is exactly -i b at the ring momenta
    p = LatticeParams(1.0, 0.1, 1.0, n_cells=40, boundary=Boundary.RING)
    rep = stability_spectrum(p, zero_mode(p))
    assert_allclose(rep.max_growth, np.sqrt(0.21), rtol=1e-10)
    assert not rep.stable


def test_stable_left_mode(odd_pt_families, odd_pt):
    fam = odd_pt_families[("left", 0.0)]
    mode = newton_solve(odd_pt, fam.modes[250].state, -1.25)
    rep = stability_spectrum(odd_pt, mode)
    assert rep.stable
    partner = newton_solve(odd_pt, pt_conjugate(mode.state), -1.25)
    assert abs(stability_spectrum(odd_pt, partner).max_growth - rep.max_growth) < 1e-8


def test_unstable_partially_broken_mode(partially_broken):
    fam = continue_family(partially_broken, Side.LEFT, 0.0, -0.9, step=1e-2)
    rep = stability_spectrum(partially_broken, fam.modes[-1])
    assert not rep.stable
    assert 0.4 < rep.max_growth < 0.5


def test_stability_rejects_unconverged_mode(odd_pt):
    bad = StationaryMode(np.ones((20, 4), dtype=complex), -1.3, 1.0)
    with pytest.raises(ValueError):
        stability_spectrum(odd_pt, bad)


def test_absorption_mask_layout(odd_pt):
    left = absorption_mask(odd_pt, Side.LEFT, 3, 0.5)
    assert_allclose(left[:3], 0)
    assert_allclose(left[3:], 0.5)
    right = absorption_mask(odd_pt, Side.RIGHT, 3, 0.5)
    assert_allclose(right, left[::-1])
    with pytest.raises(LatticeError):
        absorption_mask(odd_pt, Side.LEFT, 21)


def test_rk4_fourth_order_against_matrix_exponential():
    p = LatticeParams(1.0, 0.3, 0.8, n_cells=6, boundary=Boundary.RING)
    rng = np.random.default_rng(3)
    # tiny amplitude: Kerr contribution is ~1e-16 relative, far below the truncation error
    scale = 1e-8
    a0 = scale * (rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4)))
    exact = (expm(-1j * linear_matrix(p) * 2.0) @ a0.ravel()).reshape(6, 4)
    errs = [np.max(np.abs(integrate(p, a0, 2.0, h) - exact)) / scale for h in (0.1, 0.05, 0.025)]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all(np.abs(ratios - 16) < 2), ratios


def test_rk4_fourth_order_nonlinear(odd_pt, rng):
    a0 = 0.5 * (rng.normal(size=(20, 4)) + 1j * rng.normal(size=(20, 4)))
    sols = [integrate(odd_pt, a0, 1.0, h) for h in (0.04, 0.02, 0.01, 0.005)]
    diffs = [np.max(np.abs(sols[k] - sols[k + 1])) for k in range(3)]
    ratios = np.array(diffs[:-1]) / np.array(diffs[1:])
    assert np.all(np.abs(ratios - 16) < 2), ratios


def test_hermitian_chain_conserves_power(h_chain):
    fam = continue_family(h_chain, Side.LEFT, 0.0, 0.5, step=1e-2)
    res = propagate(h_chain, fam.modes[-1].state, 100.0, 0.01, noise_amplitude=1e-3,
                    rng_seed=1, sample_dz=1.0)
    assert np.max(np.abs(res.power - res.power[0])) / res.power[0] < 1e-8


def test_stationary_mode_stays_put(odd_pt_families, odd_pt):
    mode = odd_pt_families[("left", 0.0)].modes[200]
    res = propagate(odd_pt, mode.state, 20.0, 0.01, sample_dz=1.0)
    assert res.deviation.max() < 1e-8
    assert res.step_error_per_z < 1e-6


def test_propagation_is_reproducible(odd_pt_families, odd_pt):
    mode = odd_pt_families[("left", 0.0)].modes[200]
    runs = [propagate(odd_pt, mode.state, 5.0, noise_amplitude=1e-3, rng_seed=9) for _ in range(2)]
    assert np.array_equal(runs[0].snapshots, runs[1].snapshots)


def test_blowup_is_detected():
    # fully broken chain: the linear instability grows by e^98 over z = 100
    p = LatticeParams(0.5, 0.1, 1.0)
    rng = np.random.default_rng(0)
    a0 = 1e-3 * rng.normal(size=(20, 4))
    res = propagate(p, a0, 100.0, 0.01, sample_dz=0.5, monitor_z=0)
    assert res.blew_up or res.deviation.max() > 1


def test_noise_is_relative_and_seeded():
    state = np.zeros((3, 4), dtype=complex)
    state[0, 0] = 2.0
    a = add_noise(state, 1e-3, np.random.default_rng(5))
    b = add_noise(state, 1e-3, np.random.default_rng(5))
    assert np.array_equal(a, b)
    assert np.max(np.abs((a - state).real)) <= 2e-3


def test_fit_growth_rate_on_synthetic_data():
    z = np.linspace(0, 40, 401)
    d = 1e-4 * np.exp(0.4 * z)
    assert_allclose(fit_growth_rate(z, d, prefactor_exponent=0.0), 0.4, rtol=1e-10)
    d = 1e-4 * np.exp(0.4 * z) * np.maximum(z, 1e-3) ** -0.25
    assert_allclose(fit_growth_rate(z, d, low=1e-3), 0.4, rtol=1e-10)

"""Linear stability of stationary modes and direct z-propagation."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .bloch import DEFAULT_DIMENSION_CAP, max_growth_rate  # noqa: F401  (re-exported)
from .lattice import LatticeError, LatticeParams, _check_mask, as_state, linear_matrix
from .stationary import Side, StationaryMode, residual_norm, stationary_jacobian

log = logging.getLogger(__name__)

BLOWUP_AMPLITUDE = 1e6


class Verdict(str, enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"


@dataclass
class StabilityReport:
    eigenvalues: np.ndarray
    max_growth: float
    verdict: Verdict
    tolerance: float
    b: float

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


def linearization(params: LatticeParams, mode: StationaryMode, gamma_mask=None) -> np.ndarray:
    """Real Jacobian of ``du/dz = -i G(u) - gamma u`` at the mode (co-rotating frame)."""
    n = params.n_cells
    jg = stationary_jacobian(params, mode.state, mode.b)
    half = 4 * n
    # multiplication by -i in (Re, Im) coordinates
    jac = np.vstack([jg[half:], -jg[:half]])
    if gamma_mask is not None:
        g = np.repeat(_check_mask(gamma_mask, n), 4)
        jac -= np.diag(np.concatenate([g, g]))
    return jac


def stability_spectrum(params: LatticeParams, mode: StationaryMode, gamma_mask=None,
                       tolerance: float = 1e-8, zero_window: float = 1e-4,
                       max_residual: float = 1e-8,
                       cap: int = DEFAULT_DIMENSION_CAP) -> StabilityReport:
    """Eigenvalues of the linearization; unstable iff some ``Re > tolerance``.

    The U(1) phase symmetry contributes a 2x2 Jordan block at the origin which
    floating point splits by ~1e-6.  For a nonzero mode the two eigenvalues
    closest to 0 are dropped from the verdict if they lie within ``zero_window``.
    """
    if 8 * params.n_cells > 2 * cap:
        raise LatticeError(f"linearization dimension {8 * params.n_cells} exceeds cap")
    res = residual_norm(params, mode.state, mode.b)
    if res > max_residual:
        raise ValueError(f"mode residual {res:.3g} exceeds {max_residual:.3g}")
    evals = np.linalg.eigvals(linearization(params, mode, gamma_mask))
    active = evals
    if np.any(mode.state):
        near = np.argsort(np.abs(evals))[:2]
        near = near[np.abs(evals[near]) < zero_window]
        active = np.delete(evals, near)
    growth = float(active.real.max()) if active.size else 0.0
    verdict = Verdict.UNSTABLE if growth > tolerance else Verdict.STABLE
    return StabilityReport(evals, growth, verdict, tolerance, mode.b)


def absorption_mask(params: LatticeParams, edge_side: Side, protected_cells: int = 3,
                    gamma: float = 0.5) -> np.ndarray:
    """Zero absorption on the ``protected_cells`` next to the active edge, ``gamma`` elsewhere."""
    n = params.n_cells
    if not 0 <= protected_cells <= n:
        raise LatticeError(f"protected_cells must lie in [0, {n}]")
    if gamma < 0:
        raise LatticeError("gamma must be non-negative")
    mask = np.full(n, float(gamma))
    if Side(edge_side) is Side.LEFT:
        mask[:protected_cells] = 0.0
    else:
        mask[n - protected_cells:] = 0.0
    return mask


# --- propagation --------------------------------------------------------

@dataclass
class PropagationResult:
    z: np.ndarray
    snapshots: np.ndarray        # (n_samples, n_cells, 4)
    power: np.ndarray
    deviation: np.ndarray        # whole lattice, phase-aligned to the reference
    edge_deviation: np.ndarray   # edge cells only
    blowup_z: float | None
    step: float
    rng_seed: int | None
    step_error_per_z: float | None

    @property
    def blew_up(self) -> bool:
        return self.blowup_z is not None


def _make_rhs(params: LatticeParams, gamma_mask):
    lin = linear_matrix(params)
    if params.n_cells > 64:
        lin = sp.csr_matrix(lin)
    n = params.n_cells
    g = None if gamma_mask is None else np.repeat(_check_mask(gamma_mask, n), 4)
    partner = np.arange(4 * n) ^ 1

    def rhs(a):
        i = a.real ** 2 + a.imag ** 2
        out = -1j * (lin @ a - (i + (2.0 / 3.0) * i[partner]) * a)
        if g is not None:
            out -= g * a
        return out

    return rhs


def rk4_step(rhs, a, h):
    k1 = rhs(a)
    k2 = rhs(a + 0.5 * h * k1)
    k3 = rhs(a + 0.5 * h * k2)
    k4 = rhs(a + h * k3)
    return a + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(params: LatticeParams, initial, z_max: float, step: float = 0.01,
              gamma_mask=None) -> np.ndarray:
    """Fixed-step RK4 from 0 to ``z_max``; returns the final state."""
    if step <= 0 or z_max < 0:
        raise LatticeError("step must be positive and z_max non-negative")
    rhs = _make_rhs(params, gamma_mask)
    a = as_state(initial, params.n_cells).ravel().copy()
    n_steps = int(round(z_max / step))
    for _ in range(n_steps):
        a = rk4_step(rhs, a, step)
    return a.reshape(params.n_cells, 4)


def _aligned_distance(ref: np.ndarray, cur: np.ndarray) -> float:
    overlap = np.vdot(ref, cur)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(cur - phase * ref), initial=0.0))


def add_noise(state, amplitude: float, rng: np.random.Generator) -> np.ndarray:
    """Complex uniform noise relative to the peak amplitude of ``state``."""
    a = as_state(state)
    scale = amplitude * max(np.max(np.abs(a)), 1e-300)
    noise = rng.uniform(-1, 1, a.shape) + 1j * rng.uniform(-1, 1, a.shape)
    return a + scale * noise


def propagate(params: LatticeParams, initial, z_max: float, step: float = 0.01,
              gamma_mask=None, noise_amplitude: float = 0.0, rng_seed: int | None = None,
              sample_dz: float | None = None, reference=None, edge_side: Side = Side.LEFT,
              edge_cells: int = 3, monitor_z: float = 1.0) -> PropagationResult:
    """Integrate the lattice equation with classical RK4 at fixed step.

    Deviations are measured against ``reference`` (default: the noiseless
    initial state) after removing the global phase.  The step-halving monitor
    re-runs the first ``monitor_z`` units at ``step/2``.
    """
    if step <= 0:
        raise LatticeError("step must be positive")
    if noise_amplitude < 0:
        raise LatticeError("noise amplitude must be non-negative")
    n = params.n_cells
    clean = as_state(initial, n)
    ref = clean if reference is None else as_state(reference, n)
    rng = np.random.default_rng(rng_seed)
    start = add_noise(clean, noise_amplitude, rng) if noise_amplitude > 0 else clean.copy()

    edge = slice(0, edge_cells) if Side(edge_side) is Side.LEFT else slice(n - edge_cells, n)
    ref_edge = ref[edge].ravel()

    n_steps = int(round(z_max / step))
    if sample_dz is None:
        sample_dz = max(step, z_max / 1000) if z_max > 0 else step
    every = max(1, int(round(sample_dz / step)))

    rhs = _make_rhs(params, gamma_mask)
    a = start.ravel().copy()
    zs, snaps = [0.0], [start.copy()]
    blowup = None
    for k in range(1, n_steps + 1):
        a = rk4_step(rhs, a, step)
        if k % every == 0 or k == n_steps:
            peak = np.max(np.abs(a))
            if not np.isfinite(peak) or peak > BLOWUP_AMPLITUDE:
                blowup = k * step
                log.warning("blow-up at z = %.4g", blowup)
                break
            zs.append(k * step)
            snaps.append(a.reshape(n, 4).copy())

    snapshots = np.array(snaps)
    flat = snapshots.reshape(len(snaps), -1)
    power = np.sum(np.abs(flat) ** 2, axis=1)
    deviation = np.array([_aligned_distance(ref.ravel(), s) for s in flat])
    edge_dev = np.array([_aligned_distance(ref_edge, s.reshape(n, 4)[edge].ravel())
                         for s in flat])

    step_error = None
    if monitor_z > 0 and n_steps > 0:
        zm = min(monitor_z, z_max)
        coarse = integrate(params, start, zm, step, gamma_mask)
        fine = integrate(params, start, zm, step / 2, gamma_mask)
        step_error = float(np.max(np.abs(coarse - fine)) / zm)
        if step_error > 1e-6:
            log.warning("step-halving difference %.3g per unit z exceeds 1e-6", step_error)

    return PropagationResult(np.array(zs), snapshots, power, deviation, edge_dev,
                             blowup, step, rng_seed, step_error)


def fit_growth_rate(z, deviation, low: float | None = None, high: float = 0.1,
                    prefactor_exponent: float = 0.25) -> float:
    """Exponential rate of ``deviation`` over the linear-growth window.

    The window runs from 10x the initial deviation up to ``high``.  Broadband
    noise feeding a band whose growth rate peaks quadratically in ``q`` grows
    like ``exp(g z) z**(-1/4)``; the fit is ``log d + p log z = g z + c`` with
    ``p = prefactor_exponent`` (0 gives a plain log-linear fit).
    """
    z = np.asarray(z, dtype=float)
    d = np.asarray(deviation, dtype=float)
    low = 10 * d[0] if low is None else low
    sel = (d > low) & (d < high) & (z > 0)
    if sel.sum() < 3:
        raise ValueError("not enough samples in the linear-growth window")
    first = np.argmax(sel)
    last = len(sel) - np.argmax(sel[::-1])
    window = slice(first, last)
    zw = z[window]
    return float(np.polyfit(zw, np.log(d[window]) + prefactor_exponent * np.log(zw), 1)[0])

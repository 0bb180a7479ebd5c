"""Bloch-space analysis: dispersion, PT phases, block form and Zak phases."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .lattice import (
    DEFAULT_ATOL,
    SIGMA_0,
    SIGMA_1,
    SIGMA_2,
    SIGMA_3,
    LatticeError,
    LatticeParams,
    cell_matrix,
    coupling_blocks,
    linear_matrix,
)

DEFAULT_DIMENSION_CAP = 4000


class RegimeError(LatticeError):
    """Operation requires a different symmetry regime."""


class DegenerateSpectrumError(RuntimeError):
    """Bands touch (exceptional point or band crossing) somewhere on the grid."""


def block_transform(alpha: float) -> np.ndarray:
    """Unitary ``U`` with ``U H(q) U^dag = s0 x h(q)``."""
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([
        [-s, c, 0, 0],
        [0, 0, 0, 1],
        [c, s, 0, 0],
        [0, 0, 1, 0],
    ], dtype=complex)


def bloch_hamiltonian(params: LatticeParams, q: float) -> np.ndarray:
    """4x4 ``H(q) = H + kappa' (H- e^{-iq} + H+ e^{iq})``."""
    h_plus, h_minus = coupling_blocks(params.alpha)
    return cell_matrix(params) + params.kappa_prime * (
        h_minus * np.exp(-1j * q) + h_plus * np.exp(1j * q)
    )


def reduced_hamiltonian(params: LatticeParams, q: float) -> np.ndarray:
    """2x2 Rice-Mele block ``h(q)``."""
    k, kp = params.kappa, params.kappa_prime
    return (1j * (k + kp * np.cos(q)) * SIGMA_1
            + 1j * kp * np.sin(q) * SIGMA_2
            + params.delta * SIGMA_3)


def dispersion(params: LatticeParams, q):
    """Upper branch ``b~(q) = sqrt(delta^2 - k^2 - k'^2 - 2 k k' cos q)``.

    Branch: ``Re >= 0``; on the imaginary axis ``Im >= 0``.
    """
    k, kp = params.kappa, params.kappa_prime
    q = np.asarray(q, dtype=float)
    arg = params.delta ** 2 - k ** 2 - kp ** 2 - 2 * k * kp * np.cos(q) + 0j
    root = np.sqrt(arg)
    root = np.where(root.real < 0, -root, root)
    root = np.where(root.real == 0, 1j * np.abs(root.imag), root)
    return root if root.ndim else complex(root)


def q_grid(n: int) -> np.ndarray:
    """``n`` equally spaced momenta on ``[-pi, pi)``."""
    return -np.pi + 2 * np.pi * np.arange(n) / n


class PTPhase(str, enum.Enum):
    UNBROKEN = "unbroken"
    PARTIALLY_BROKEN = "partially_broken"
    FULLY_BROKEN = "fully_broken"
    EXCEPTIONAL_POINT = "exceptional_point"


@dataclass(frozen=True)
class PhaseLabel:
    phase: PTPhase
    delta1: float
    delta2: float


def _require_real_couplings(params: LatticeParams, atol: float) -> tuple[float, float]:
    k, kp = params.kappa, params.kappa_prime
    if abs(k.imag) > atol or abs(kp.imag) > atol:
        raise RegimeError("PT-phase classification needs real couplings (odd-PT chain)")
    return k.real, kp.real


def phase_boundaries(params: LatticeParams, atol: float = DEFAULT_ATOL) -> tuple[float, float]:
    k, kp = _require_real_couplings(params, atol)
    return abs(k) + abs(kp), abs(abs(k) - abs(kp))


def classify_pt_phase(params: LatticeParams, atol: float = DEFAULT_ATOL) -> PhaseLabel:
    d1, d2 = phase_boundaries(params, atol)
    delta = abs(params.delta)
    if abs(delta - d1) <= atol or abs(delta - d2) <= atol:
        phase = PTPhase.EXCEPTIONAL_POINT
    elif delta > d1:
        phase = PTPhase.UNBROKEN
    elif delta > d2:
        phase = PTPhase.PARTIALLY_BROKEN
    else:
        phase = PTPhase.FULLY_BROKEN
    return PhaseLabel(phase, d1, d2)


def max_growth_rate(params: LatticeParams, q=2001, atol: float = DEFAULT_ATOL) -> float:
    """Largest bulk growth rate ``max_q Im b~(q)``.

    ``q`` is either a grid size or an explicit array of momenta.  The analytic
    extremes ``q = 0, pi`` are always included.
    """
    _require_real_couplings(params, atol)
    qs = q_grid(q) if np.isscalar(q) else np.asarray(q, dtype=float)
    qs = np.concatenate([qs, [0.0, np.pi]])
    return float(max(0.0, np.max(dispersion(params, qs).imag)))


def band_intervals(params: LatticeParams, n_q: int = 4001) -> list[tuple[float, float]]:
    """Real-part extent of the two bulk branches ``-b~`` and ``+b~``."""
    qs = np.concatenate([q_grid(n_q), [0.0, np.pi]])
    re = dispersion(params, qs).real
    lo, hi = float(re.min()), float(re.max())
    return [(-hi, -lo), (lo, hi)]


def in_band(params: LatticeParams, b: float, intervals=None) -> bool:
    intervals = band_intervals(params) if intervals is None else intervals
    return any(lo <= b <= hi for lo, hi in intervals)


def finite_spectrum(params: LatticeParams, cap: int = DEFAULT_DIMENSION_CAP) -> np.ndarray:
    """Propagation constants ``b = -eig(L)`` of the finite lattice, sorted by real part."""
    dim = 4 * params.n_cells
    if dim > cap:
        raise LatticeError(f"dense dimension {dim} exceeds cap {cap}")
    b = -np.linalg.eigvals(linear_matrix(params))
    return b[np.lexsort((b.imag, b.real))]


def hausdorff(a, b) -> float:
    """Symmetric Hausdorff distance between two finite sets of complex numbers."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    d = np.abs(a[:, None] - b[None, :])
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def ring_band_points(params: LatticeParams) -> np.ndarray:
    """Analytic ``+-b~(q)`` at the momenta ``2 pi k / n_cells`` of a ring, each twice."""
    qs = 2 * np.pi * np.arange(params.n_cells) / params.n_cells
    bt = dispersion(params, qs)
    return np.concatenate([bt, bt, -bt, -bt])


# --- Zak phase -------------------------------------------------------------

class Band(str, enum.Enum):
    UPPER = "upper"
    LOWER = "lower"


@dataclass(frozen=True)
class ZakResult:
    phase: float            # real part of the biorthogonal Zak phase, in [0, 2 pi)
    complex_phase: complex  # i * ln(Wilson loop); imaginary part is ln|W|
    phase_h: float          # same for the reduced 2x2 block
    complex_phase_h: complex
    wilson_phases: np.ndarray  # eigenphases of the 4x4 non-Abelian Wilson loop
    grid_size: int


def _wrap(phi: float) -> float:
    phi = float(np.mod(phi, 2 * np.pi))
    return 0.0 if 2 * np.pi - phi < 1e-9 else phi


def _band_target(params, qs, band: Band, tol: float) -> np.ndarray:
    """Band eigenvalue followed continuously around the zone.

    With complex couplings ``b~`` can cross the imaginary axis, where the
    ``Re >= 0`` branch of :func:`dispersion` jumps; the sign is re-chosen at
    each momentum to stay on the same sheet.  "Upper" is the sheet with
    ``Re b~ >= 0`` at ``q = -pi``.
    """
    bt = dispersion(params, qs)
    if np.min(np.abs(bt)) <= tol:
        raise DegenerateSpectrumError(
            f"bands touch on the grid (min |b~| = {np.min(np.abs(bt)):.3g})")
    tracked = bt.copy()
    for k in range(1, len(bt)):
        if abs(tracked[k] - tracked[k - 1]) > abs(tracked[k] + tracked[k - 1]):
            tracked[k] = -tracked[k]
    if abs(tracked[-1] - tracked[0]) > abs(tracked[-1] + tracked[0]):
        raise DegenerateSpectrumError(
            "the two bands exchange around the zone; no single-band Zak phase")
    return tracked if Band(band) is Band.UPPER else -tracked


def zak_phase_reduced(params: LatticeParams, band: Band = Band.LOWER,
                      grid_size: int = 2001, tol: float = 1e-8) -> complex:
    """Biorthogonal Zak phase of ``h(q)`` from the discrete Wilson product.

    Returns ``i * sum_k [ln L_k - ln(L_k R_k) / 2]`` with forward links
    ``L_k = a~_k^dag a_{k+1}`` and backward links ``R_k = a~_{k+1}^dag a_k``;
    its real part is the Berry phase.  For a non-Hermitian band the plain
    product carries an O(dq) error in the phase; the gauge-invariant
    ``L_k R_k`` term cancels it.
    """
    qs = q_grid(grid_size)
    target = _band_target(params, qs, band, tol)
    right, left = [], []
    for q, t in zip(qs, target):
        w, v = np.linalg.eig(reduced_hamiltonian(params, q))
        i = int(np.argmin(np.abs(w - t)))
        right.append(v[:, i])
        left.append(np.linalg.inv(v)[i, :])  # row: a~^dag, with a~^dag a = 1
    log_sum = 0j
    for k in range(grid_size):
        nxt = (k + 1) % grid_size
        forward = left[k] @ right[nxt]
        log_sum += np.log(forward) - 0.5 * np.log(forward * (left[nxt] @ right[k]))
    return 1j * log_sum


def _projector_basis(proj: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right basis ``P E`` and dual rows ``(E^dag P E)^-1 E^dag P`` of a rank-2 projector."""
    best, best_det = None, -1.0
    for cols in ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)):
        det = abs(np.linalg.det(proj[np.ix_(cols, cols)]))
        if det > best_det:
            best, best_det = cols, det
    e = np.eye(4)[:, best]
    right = proj @ e
    dual = np.linalg.solve(e.T @ proj @ e, e.T @ proj)
    return right, dual


def zak_phase(params: LatticeParams, band: Band = Band.LOWER,
              grid_size: int = 2001, tol: float = 1e-8) -> ZakResult:
    """Zak phase of a doubly degenerate band of the 4x4 ``H(q)`` and of ``h(q)``.

    The degenerate band is handled by the non-Abelian Wilson loop built from
    the spectral projector ``(H(q) +- b~ I) / (2 b~)``; its two eigenphases
    coincide with the 2x2 Zak phase.
    """
    qs = q_grid(grid_size)
    target = _band_target(params, qs, band, tol)
    bases = []
    for q, t in zip(qs, target):
        h = bloch_hamiltonian(params, q)
        proj = (h + t * np.eye(4)) / (2 * t)
        bases.append(_projector_basis(proj))
    wilson = np.eye(2, dtype=complex)
    correction = 0j
    for k in range(grid_size):
        right_k, dual_k = bases[k]
        right_n, dual_n = bases[(k + 1) % grid_size]
        forward = dual_k @ right_n
        wilson = wilson @ forward
        # same O(dq) cancellation as the 2x2 loop, per state of the doublet
        correction += 0.25 * np.log(np.linalg.det(forward @ (dual_n @ right_k)))
    evals = np.linalg.eigvals(wilson) * np.exp(-correction)
    wilson_phases = np.sort(np.array([_wrap(-np.angle(e)) for e in evals]))
    # both eigenvalues coincide; average them on the unit circle
    log_w = np.log(evals[0]) + np.mean(np.log(evals / evals[0]))
    complex_phase = 1j * log_w
    phi_h = zak_phase_reduced(params, band, grid_size, tol)
    return ZakResult(
        phase=_wrap(complex_phase.real),
        complex_phase=complex_phase,
        phase_h=_wrap(phi_h.real),
        complex_phase_h=phi_h,
        wilson_phases=wilson_phases,
        grid_size=grid_size,
    )


@dataclass(frozen=True)
class BlochData:
    q_grid: np.ndarray
    branches: np.ndarray        # shape (n_q, 2): (-b~, +b~)
    eigvecs: np.ndarray         # shape (n_q, 2, 2): columns are right eigenvectors of h(q)
    left_eigvecs: np.ndarray    # shape (n_q, 2, 2): rows are dual vectors, left @ right = I
    zak: ZakResult | None


def bloch_data(params: LatticeParams, grid_size: int = 2001, with_zak: bool = True) -> BlochData:
    qs = q_grid(grid_size)
    bt = dispersion(params, qs)
    branches = np.stack([-bt, bt], axis=1)
    vecs = np.empty((grid_size, 2, 2), dtype=complex)
    duals = np.empty_like(vecs)
    for n, q in enumerate(qs):
        w, v = np.linalg.eig(reduced_hamiltonian(params, q))
        order = np.argsort(w.real + 1e-9 * w.imag)
        v = v[:, order]
        vecs[n] = v
        duals[n] = np.linalg.inv(v)
    zak = None
    if with_zak:
        try:
            zak = zak_phase(params, Band.LOWER, grid_size)
        except DegenerateSpectrumError:
            zak = None
    return BlochData(qs, branches, vecs, duals, zak)

"""Quadrimer lattice: parameters, linear operator, Kerr term and symmetries.

A lattice state is a complex array of shape ``(n_cells, 4)``; row ``j`` holds
the amplitudes ``(A1, A2, A3, A4)`` of primitive cell ``j``.  Components 1, 2
are the two polarizations of the "+" waveguide, components 3, 4 those of the
"-" waveguide.

Sign convention: the evolution is ``dA/dz = -i [L A - F(A) A] - gamma A`` so a
stationary state ``A exp(i b z)`` solves ``L A - F(A) A = -b A``.  The left
linear edge state then has ``b = -delta``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

DEFAULT_ATOL = 1e-12

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_3 = np.array([[1, 0], [0, -1]], dtype=complex)

# (A1, A2, A3, A4) -> index of the same-waveguide partner polarization
_PARTNER = np.array([1, 0, 3, 2])


class LatticeError(ValueError):
    """Invalid lattice parameters or state."""


class Boundary(str, enum.Enum):
    LEFT_SEMI = "left_semi"
    RIGHT_SEMI = "right_semi"
    FINITE = "finite"
    RING = "ring"


@dataclass(frozen=True)
class LatticeParams:
    """Reduced model parameters.

    Semi-infinite boundaries are realised as open chains; ``n_cells`` must be
    large enough that the edge-state tail ``|kappa/kappa'|**(2 n_cells)`` is
    below ``truncation_tol``.
    """

    delta: float
    kappa: complex
    kappa_prime: complex
    alpha: float = np.pi / 6
    n_cells: int = 20
    boundary: Boundary = Boundary.FINITE
    truncation_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, "boundary", Boundary(self.boundary))
        object.__setattr__(self, "kappa", complex(self.kappa))
        object.__setattr__(self, "kappa_prime", complex(self.kappa_prime))
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "alpha", float(self.alpha))
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise LatticeError(f"n_cells must be a positive integer, got {self.n_cells}")
        object.__setattr__(self, "n_cells", int(self.n_cells))
        if self.is_semi_infinite and self.truncation_tail > self.truncation_tol:
            raise LatticeError(
                f"{self.n_cells} cells leave a truncation tail {self.truncation_tail:.3g} "
                f"above tolerance {self.truncation_tol:.3g}"
            )

    @property
    def is_semi_infinite(self) -> bool:
        return self.boundary in (Boundary.LEFT_SEMI, Boundary.RIGHT_SEMI)

    @property
    def decay_ratio(self) -> float:
        """``|kappa / kappa'|``; infinite when ``kappa' = 0``."""
        if self.kappa_prime == 0:
            return np.inf
        return abs(self.kappa / self.kappa_prime)

    @property
    def truncation_tail(self) -> float:
        # trivial phase has no edge states, nothing to truncate
        r = self.decay_ratio
        if r >= 1:
            return 0.0
        return r ** (2 * self.n_cells)

    @property
    def periodic(self) -> bool:
        return self.boundary is Boundary.RING

    def with_(self, **changes) -> "LatticeParams":
        return replace(self, **changes)


def rotation(alpha: float) -> np.ndarray:
    c, s = np.cos(alpha), np.sin(alpha)
    return np.array([[c, -s], [s, c]], dtype=complex)


def coupling_blocks(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(H_plus, H_minus)`` with ``H_minus = H_plus.T = (i/2)(s1 + i s2) x R``."""
    h_minus = 0.5j * np.kron(SIGMA_1 + 1j * SIGMA_2, rotation(alpha))
    return h_minus.T.copy(), h_minus


def cell_matrix(params: LatticeParams) -> np.ndarray:
    """On-cell 4x4 block ``delta s3 x s0 + kappa (H+ + H-)``."""
    h_plus, h_minus = coupling_blocks(params.alpha)
    return params.delta * np.kron(SIGMA_3, SIGMA_0) + params.kappa * (h_plus + h_minus)


def as_state(state, n_cells: int | None = None) -> np.ndarray:
    arr = np.asarray(state, dtype=complex)
    if arr.ndim == 1 and arr.size % 4 == 0:
        arr = arr.reshape(-1, 4)
    if arr.ndim != 2 or arr.shape[1] != 4:
        raise LatticeError(f"state must have shape (n_cells, 4), got {arr.shape}")
    if n_cells is not None and arr.shape[0] != n_cells:
        raise LatticeError(f"state has {arr.shape[0]} cells, lattice has {n_cells}")
    if not np.all(np.isfinite(arr)):
        raise LatticeError("state contains non-finite amplitudes")
    return arr


def zero_state(n_cells: int) -> np.ndarray:
    return np.zeros((n_cells, 4), dtype=complex)


def apply_linear(params: LatticeParams, state) -> np.ndarray:
    """Linear part ``H A^j + kappa' (H- A^{j-1} + H+ A^{j+1})`` applied cell-wise."""
    a = as_state(state, params.n_cells)
    ir = 1j * rotation(params.alpha)
    plus, minus = a[:, :2], a[:, 2:]

    # neighbours: "-" pair of cell j-1 and "+" pair of cell j+1
    minus_prev = np.zeros_like(minus)
    plus_next = np.zeros_like(plus)
    if params.periodic:
        minus_prev = np.roll(minus, 1, axis=0)
        plus_next = np.roll(plus, -1, axis=0)
    else:
        minus_prev[1:] = minus[:-1]
        plus_next[:-1] = plus[1:]

    out = np.empty_like(a)
    out[:, :2] = (params.delta * plus
                  + (params.kappa * minus + params.kappa_prime * minus_prev) @ ir.T)
    out[:, 2:] = (-params.delta * minus
                  + (params.kappa * plus + params.kappa_prime * plus_next) @ ir)
    return out


def linear_matrix(params: LatticeParams) -> np.ndarray:
    """Dense ``4 n x 4 n`` matrix of :func:`apply_linear` (index ``4 j + c``)."""
    n = params.n_cells
    h_plus, h_minus = coupling_blocks(params.alpha)
    m = np.zeros((4 * n, 4 * n), dtype=complex)
    h0 = cell_matrix(params)
    for j in range(n):
        m[4 * j:4 * j + 4, 4 * j:4 * j + 4] += h0
        prev, nxt = j - 1, j + 1
        if params.periodic:
            prev %= n
            nxt %= n
        if 0 <= prev < n:
            m[4 * j:4 * j + 4, 4 * prev:4 * prev + 4] += params.kappa_prime * h_minus
        if 0 <= nxt < n:
            m[4 * j:4 * j + 4, 4 * nxt:4 * nxt + 4] += params.kappa_prime * h_plus
    return m


def kerr_coefficients(state) -> np.ndarray:
    """Diagonal of ``F(A^j)`` for every cell, shape ``(n_cells, 4)``."""
    a = as_state(state)
    i = np.abs(a) ** 2
    return i + (2.0 / 3.0) * i[:, _PARTNER]


def apply_nonlinearity(state) -> np.ndarray:
    """Focusing Kerr term ``F(A^j) A^j``."""
    a = as_state(state)
    return kerr_coefficients(a) * a


def apply_rhs(params: LatticeParams, state, gamma_mask=None) -> np.ndarray:
    """``dA/dz`` including the optional per-cell absorption ``-gamma_j A^j``."""
    a = as_state(state, params.n_cells)
    rhs = -1j * (apply_linear(params, a) - apply_nonlinearity(a))
    if gamma_mask is not None:
        g = _check_mask(gamma_mask, params.n_cells)
        rhs -= g[:, None] * a
    return rhs


def _check_mask(gamma_mask, n_cells: int) -> np.ndarray:
    g = np.asarray(gamma_mask, dtype=float)
    if g.ndim == 0:
        g = np.full(n_cells, float(g))
    if g.shape != (n_cells,):
        raise LatticeError(f"absorption mask must have length {n_cells}, got {g.shape}")
    if np.any(g < 0):
        raise LatticeError("absorption mask entries must be non-negative")
    return g


def pt_conjugate(state) -> np.ndarray:
    """Doublet partner ``P T_f A`` with ``P = s3 x s0`` and ``T_f = i s0 x s2 K``."""
    a = as_state(state)
    c = a.conj()
    return np.stack([c[:, 1], -c[:, 0], -c[:, 3], c[:, 2]], axis=1)


class Regime(str, enum.Enum):
    ODD_PT = "odd_pt"
    HERMITIAN = "hermitian"
    NEITHER = "neither"


@dataclass(frozen=True)
class SymmetryRegime:
    label: Regime
    topology: str | None = None  # "trivial" / "nontrivial" / None
    details: dict = field(default_factory=dict)


def _angle_close(a: float, b: float, tol: float) -> bool:
    return abs(np.angle(np.exp(1j * (a - b)))) <= tol


def classify_regime(chi_i: float, phi1: float, phi2: float, tol: float = 1e-9) -> SymmetryRegime:
    """Regime selected by the susceptibility phases and uniform gain.

    The topology entry is the phase-based prediction only; the actual
    ``|kappa|`` vs ``|kappa'|`` ordering depends on the modulation amplitudes.
    """
    details = {"chi_i": chi_i, "phi1": phi1, "phi2": phi2}
    if abs(chi_i) > tol:
        details["reason"] = "uniform gain/absorption chi_i != 0"
        return SymmetryRegime(Regime.NEITHER, None, details)
    if _angle_close(phi1, np.pi / 2, tol):
        if _angle_close(phi2, -np.pi / 2, tol):
            details["reason"] = "phi = (pi/2, -pi/2)"
            return SymmetryRegime(Regime.ODD_PT, "nontrivial", details)
        if _angle_close(phi2, np.pi / 2, tol):
            details["reason"] = "phi = (pi/2, pi/2)"
            return SymmetryRegime(Regime.ODD_PT, "trivial", details)
    if _angle_close(phi1, 0.0, tol):
        if _angle_close(phi2, 0.0, tol):
            details["reason"] = "phi = (0, 0)"
            return SymmetryRegime(Regime.HERMITIAN, "nontrivial", details)
        if _angle_close(phi2, np.pi, tol):
            details["reason"] = "phi = (0, pi)"
            return SymmetryRegime(Regime.HERMITIAN, "trivial", details)
    details["reason"] = "phase pair matches no symmetric configuration"
    return SymmetryRegime(Regime.NEITHER, None, details)


def coupling_regime(kappa: complex, kappa_prime: complex, atol: float = DEFAULT_ATOL) -> SymmetryRegime:
    """Regime read off the couplings: real -> odd-PT, imaginary -> Hermitian."""
    k, kp = complex(kappa), complex(kappa_prime)
    topology = "nontrivial" if abs(k) < abs(kp) else "trivial"
    details = {"kappa": k, "kappa_prime": kp}
    if abs(k.imag) <= atol and abs(kp.imag) <= atol:
        return SymmetryRegime(Regime.ODD_PT, topology, details)
    if abs(k.real) <= atol and abs(kp.real) <= atol:
        return SymmetryRegime(Regime.HERMITIAN, topology, details)
    return SymmetryRegime(Regime.NEITHER, topology, details)

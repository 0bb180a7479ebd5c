"""Stationary edge states and their continuation in the propagation constant.

A stationary mode ``A exp(i b z)`` solves ``G(A) = L A - F(A) A + b A = 0``.
Amplitudes are handled in real coordinates ``x = (Re A, Im A)`` flattened
cell-major, so the Jacobian is an ``8 n x 8 n`` real matrix.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .bloch import band_intervals
from .lattice import (
    LatticeParams,
    apply_linear,
    apply_nonlinearity,
    as_state,
    linear_matrix,
)

log = logging.getLogger(__name__)

SOLVER_TOL = 1e-10


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


class NoEdgeStateError(ValueError):
    """Topologically trivial couplings: no linear edge state exists."""


class UnsupportedBranchError(ValueError):
    pass


class NewtonDivergenceError(RuntimeError):
    def __init__(self, msg, best_residual=np.inf):
        super().__init__(msg)
        self.best_residual = best_residual


class BifurcationPointError(RuntimeError):
    """Jacobian singular beyond the gauge direction."""


class ContinuationError(RuntimeError):
    pass


@dataclass
class StationaryMode:
    state: np.ndarray
    b: float
    residual: float
    side: Side | None = None
    seed_nu: float | None = None
    power: float = field(init=False)
    iterations: int = 0

    def __post_init__(self):
        self.power = power(self.state)


def power(state) -> float:
    """Total power ``sum_j (A^j)^dag A^j``."""
    return float(np.sum(np.abs(as_state(state)) ** 2))


def stationary_residual(params: LatticeParams, state, b: float) -> np.ndarray:
    a = as_state(state, params.n_cells)
    return apply_linear(params, a) - apply_nonlinearity(a) + b * a


def residual_norm(params: LatticeParams, state, b: float) -> float:
    return float(np.max(np.abs(stationary_residual(params, state, b)), initial=0.0))


# --- linear and small-amplitude edge states -----------------------------

def _edge_ratio(params: LatticeParams) -> complex:
    if params.kappa_prime == 0 or abs(params.kappa) >= abs(params.kappa_prime):
        raise NoEdgeStateError(
            f"|kappa| = {abs(params.kappa):.3g} >= |kappa'| = {abs(params.kappa_prime):.3g}: "
            "trivial phase has no edge states")
    return -params.kappa / params.kappa_prime


def edge_profile(params: LatticeParams, side: Side, m: int) -> np.ndarray:
    """Linear edge state with unit amplitude on the edge cell.

    Left: ``(-k/k')^j e_m`` on cell ``j``.  Right: the mirror image on the
    "-" waveguide, ``(-k/k')^(n-1-j) e_{m+2}``.
    """
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")
    r = _edge_ratio(params)
    n = params.n_cells
    a = np.zeros((n, 4), dtype=complex)
    decay = r ** np.arange(n)
    if Side(side) is Side.LEFT:
        a[:, m - 1] = decay
    else:
        a[:, m + 1] = decay[::-1]
    return a


def linear_edge_state(params: LatticeParams, side: Side, m: int) -> StationaryMode:
    side = Side(side)
    a = edge_profile(params, side, m)
    b = -params.delta if side is Side.LEFT else params.delta
    # residual of the linear problem L A + b A = 0
    res = float(np.max(np.abs(apply_linear(params, a) + b * a)))
    return StationaryMode(a, b, res, side, None)


def bifurcation_shift(params: LatticeParams, nu: float) -> float:
    """Nonlinear shift ``lambda``: ``b = b_lin + eps^2 lambda`` for edge amplitude ``eps``."""
    k2, kp2 = abs(params.kappa) ** 2, abs(params.kappa_prime) ** 2
    if np.isclose(nu, 0.0, atol=1e-12):
        return kp2 / (kp2 + k2)
    if np.isclose(nu, np.pi / 4, atol=1e-12):
        return 5 * kp2 / (6 * (kp2 + k2))
    raise UnsupportedBranchError(f"nu = {nu} does not bifurcate; use 0 or pi/4")


def perturbative_seed(params: LatticeParams, side: Side, nu: float,
                      epsilon: float = 0.05) -> tuple[StationaryMode, float]:
    """Small-amplitude superposition ``eps (A_1 sin nu + A_2 cos nu)`` and its predicted ``b``."""
    side = Side(side)
    lam = bifurcation_shift(params, nu)
    a = epsilon * (np.sin(nu) * edge_profile(params, side, 1)
                   + np.cos(nu) * edge_profile(params, side, 2))
    b_lin = -params.delta if side is Side.LEFT else params.delta
    b = b_lin + epsilon ** 2 * lam
    return StationaryMode(a, b, residual_norm(params, a, b), side, nu), b


# --- Newton -------------------------------------------------------------

def to_real(state) -> np.ndarray:
    a = np.asarray(state).ravel()
    return np.concatenate([a.real, a.imag])


def from_real(x: np.ndarray, n_cells: int) -> np.ndarray:
    half = x.size // 2
    return (x[:half] + 1j * x[half:]).reshape(n_cells, 4)


def real_form(c: np.ndarray) -> np.ndarray:
    """Real ``2N x 2N`` matrix of the complex-linear map ``c``."""
    return np.block([[c.real, -c.imag], [c.imag, c.real]])


def kerr_jacobian(state) -> np.ndarray:
    """Real Jacobian of ``A -> F(A) A``."""
    a = as_state(state).ravel()
    n = a.size
    x, y = a.real, a.imag
    partner = np.arange(n) ^ 1  # 0<->1, 2<->3 within each cell
    c = np.abs(a) ** 2 + (2.0 / 3.0) * np.abs(a[partner]) ** 2
    jac = np.zeros((2 * n, 2 * n))
    idx = np.arange(n)
    # same component: c dA + 2 A Re(A* dA)
    jac[idx, idx] = c + 2 * x * x
    jac[idx, n + idx] = 2 * x * y
    jac[n + idx, idx] = 2 * y * x
    jac[n + idx, n + idx] = c + 2 * y * y
    # partner component: (4/3) A Re(A_p* dA_p)
    jac[idx, partner] = (4 / 3) * x * x[partner]
    jac[idx, n + partner] = (4 / 3) * x * y[partner]
    jac[n + idx, partner] = (4 / 3) * y * x[partner]
    jac[n + idx, n + partner] = (4 / 3) * y * y[partner]
    return jac


def stationary_jacobian(params: LatticeParams, state, b: float, lin=None) -> np.ndarray:
    """Real Jacobian of ``G(A) = L A - F(A) A + b A``."""
    lin = linear_matrix(params) if lin is None else lin
    shifted = lin + b * np.eye(lin.shape[0])
    return real_form(shifted) - kerr_jacobian(state)


def newton_solve(params: LatticeParams, guess, b: float, tol: float = SOLVER_TOL,
                 max_iter: int = 50, pivot: int | None = None,
                 side: Side | None = None, seed_nu: float | None = None,
                 lin=None, singular_tol: float = 1e-13) -> StationaryMode:
    """Gauss-Newton on ``G(A) = 0`` with the phase of one component pinned.

    The gauge row ``Im A_pivot = 0`` is appended to the ``8 n`` equations and
    the bordered system is solved in the least-squares sense; at a solution it
    is consistent, so convergence stays quadratic.
    """
    n = params.n_cells
    a = as_state(guess, n).copy()
    if not np.any(a):
        return StationaryMode(a, b, residual_norm(params, a, b), side, seed_nu)
    flat = a.ravel()
    if pivot is None:
        pivot = int(np.argmax(np.abs(flat)))
    a = a * np.exp(-1j * np.angle(flat[pivot]))
    lin = linear_matrix(params) if lin is None else lin
    gauge_row = np.zeros(8 * n)
    gauge_row[4 * n + pivot] = 1.0

    best = np.inf
    for it in range(max_iter + 1):
        g = lin @ a.ravel() - apply_nonlinearity(a).ravel() + b * a.ravel()
        res = float(np.max(np.abs(g)))
        best = min(best, res)
        if res < tol:
            return StationaryMode(a, b, res, side, seed_nu, iterations=it)
        if not np.isfinite(res) or res > 1e8:
            break
        if it == max_iter:
            break
        jac = np.vstack([stationary_jacobian(params, a, b, lin), gauge_row])
        rhs = -np.concatenate([g.real, g.imag, [a.ravel()[pivot].imag]])
        step, *_, sv = np.linalg.lstsq(jac, rhs, rcond=None)
        if sv[-1] < singular_tol * sv[0]:
            raise BifurcationPointError(
                f"Jacobian singular at b = {b:.6g} (condition {sv[0] / sv[-1]:.3g})")
        a = a + from_real(step, n)
    raise NewtonDivergenceError(
        f"Newton did not converge at b = {b:.6g}; best residual {best:.3g}", best)


# --- continuation -------------------------------------------------------

class Termination(str, enum.Enum):
    BAND_EDGE = "band_edge"
    RANGE_END = "range_end"
    NEWTON_FAILURE = "newton_failure"
    MAX_POINTS = "max_points"


@dataclass
class ModeFamily:
    modes: list[StationaryMode]
    side: Side | None
    seed_nu: float | None
    termination: Termination

    @property
    def b(self) -> np.ndarray:
        return np.array([m.b for m in self.modes])

    @property
    def power(self) -> np.ndarray:
        return np.array([m.power for m in self.modes])

    def __len__(self):
        return len(self.modes)


def continue_from(params: LatticeParams, start: StationaryMode, b_end: float,
                  step: float = 1e-3, min_step: float = 1e-6, max_points: int = 100000,
                  stop_at_band: bool = True, tol: float = SOLVER_TOL) -> ModeFamily:
    """Natural-parameter continuation in ``b`` from a converged mode toward ``b_end``.

    Secant predictor, Newton corrector; the step is halved on failure and
    restored gradually on success.
    """
    direction = 1.0 if b_end >= start.b else -1.0
    bands = band_intervals(params) if stop_at_band else []
    lin = linear_matrix(params)
    modes = [start]
    h = step
    termination = Termination.MAX_POINTS
    while len(modes) < max_points:
        last = modes[-1]
        b_next = last.b + direction * h
        if direction * (b_next - b_end) > 1e-12:
            if direction * (b_end - last.b) <= 1e-12:
                termination = Termination.RANGE_END
                break
            b_next = b_end
        if any(lo <= b_next <= hi for lo, hi in bands):
            termination = Termination.BAND_EDGE
            break
        if len(modes) >= 2:
            prev = modes[-2]
            # align gauge before extrapolating
            phase = np.vdot(prev.state, last.state)
            prev_state = prev.state * (phase / abs(phase) if phase != 0 else 1)
            t = (b_next - last.b) / (last.b - prev.b)
            guess = last.state + t * (last.state - prev_state)
        else:
            guess = last.state
        try:
            mode = newton_solve(params, guess, b_next, tol=tol, max_iter=20,
                                side=start.side, seed_nu=start.seed_nu, lin=lin)
            jump = np.max(np.abs(np.abs(mode.state) - np.abs(last.state)))
            if jump > 0.5 * max(1.0, np.max(np.abs(last.state))):
                raise NewtonDivergenceError("corrector jumped to another branch")
        except (NewtonDivergenceError, BifurcationPointError) as exc:
            h /= 2
            log.debug("step halved to %.3g at b=%.6g: %s", h, last.b, exc)
            if h < min_step:
                termination = Termination.NEWTON_FAILURE
                break
            continue
        modes.append(mode)
        if abs(mode.b - b_end) <= 1e-12:
            termination = Termination.RANGE_END
            break
        h = min(step, 2 * h)
    return ModeFamily(modes, start.side, start.seed_nu, termination)


def continue_family(params: LatticeParams, side: Side, nu: float, b_end: float,
                    step: float = 1e-3, min_step: float = 1e-6, max_points: int = 100000,
                    tol: float = SOLVER_TOL) -> ModeFamily:
    """Family bifurcating from the linear edge state of ``side`` with seed label ``nu``.

    The first point sits one step away from the linear limit; its amplitude
    comes from the small-amplitude prediction.
    """
    side = Side(side)
    lam = bifurcation_shift(params, nu)
    b_lin = -params.delta if side is Side.LEFT else params.delta
    direction = 1.0 if b_end >= b_lin else -1.0
    # focusing Kerr only shifts b upward from the linear limit
    if direction < 0:
        raise ContinuationError("edge families bifurcate toward larger b")
    eps = np.sqrt(step / lam)
    seed, b0 = perturbative_seed(params, side, nu, eps)
    try:
        first = newton_solve(params, seed.state, b0, tol=tol, side=side, seed_nu=nu)
    except (NewtonDivergenceError, BifurcationPointError) as exc:
        raise ContinuationError(f"seed failed to converge: {exc}") from exc
    return continue_from(params, first, b_end, step, min_step, max_points, tol=tol)


def locate_mode(params: LatticeParams, b: float, guess, side: Side | None = None,
                tol: float = SOLVER_TOL) -> StationaryMode:
    """Converge a user-supplied profile at ``b`` (nonzero-threshold families)."""
    return newton_solve(params, guess, b, tol=tol, side=side)


def continue_both_ways(params: LatticeParams, start: StationaryMode, b_range: tuple[float, float],
                       step: float = 1e-3, **kwargs) -> ModeFamily:
    """Bidirectional continuation from an interior mode, merged in increasing ``b``."""
    lo, hi = sorted(b_range)
    down = continue_from(params, start, lo, step, **kwargs)
    up = continue_from(params, start, hi, step, **kwargs)
    modes = down.modes[::-1] + up.modes[1:]
    return ModeFamily(modes, start.side, start.seed_nu, up.termination)

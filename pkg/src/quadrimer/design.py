"""Atomic-gas design layer: susceptibility profile, Rabi profiles, coupling integrals.

Units: lengths in um, frequencies in MHz (angular rates as 2 pi x MHz),
susceptibilities dimensionless.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from .lattice import (
    LatticeParams,
    Regime,
    SymmetryRegime,
    classify_regime,
    coupling_regime,
)

TWO_PI = 2 * np.pi

# Rb D2 probe wavelength implied by the 5S1/2 -> 5P3/2 probe transition
PROBE_WAVELENGTH_UM = 0.78

ASSUMPTIONS = {
    "mode_profile": "normalized Gaussian, sigma = r_w / sqrt(2)",
    "chi_w": "default 0.01 (not given numerically)",
    "k_p": f"2 pi / {PROBE_WAVELENGTH_UM} um^-1 (Rb D2 line)",
    "delta_alpha": "user inputs; not derived from waveguide anisotropy",
}


class DesignError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class SusceptibilityParams:
    chi_w: float = 0.01
    chi_i: float = 0.0
    chi_1: float = 1e-4
    chi_2: float = 1e-4
    phi_1: float = np.pi / 2
    phi_2: float = -np.pi / 2
    d: float = 4.0
    r_w: float = 1.0
    k_p: float = TWO_PI / PROBE_WAVELENGTH_UM
    ratio_bound: float = 0.1

    def __post_init__(self):
        if self.d <= 0 or self.r_w <= 0:
            raise DesignError("d and r_w must be positive")
        if self.d < 2 * self.r_w:
            raise DesignError(f"waveguides overlap: d = {self.d} < 2 r_w = {2 * self.r_w}")
        if self.chi_w == 0:
            raise DesignError("chi_w must be nonzero")
        for name in ("chi_1", "chi_2"):
            ratio = abs(getattr(self, name)) / abs(self.chi_w)
            if ratio > self.ratio_bound:
                raise DesignError(
                    f"|{name}|/|chi_w| = {ratio:.3g} exceeds weak-modulation bound {self.ratio_bound}")


@dataclass(frozen=True)
class AtomicConfig:
    N_a: float = 3.0e14                      # cm^-3
    Gamma_13: float = TWO_PI * 3.0           # 2 pi x MHz
    Gamma_23: float = TWO_PI * 3.0
    Gamma_34: float = TWO_PI * 3.0e-3
    Gamma_21: float = TWO_PI * 0.05
    Delta_2: float = 0.1                     # MHz
    Delta_3: float = -41.0
    Delta_4: float = 200.0
    Omega_c0: float = 10.0
    Omega_a0: float = 20.0
    Omega_c1: float = 8.0
    Omega_a1: float = 610.0
    phi_c: float = 1.1
    phi_a: float = -0.3

    def __post_init__(self):
        rates = ("N_a", "Gamma_13", "Gamma_23", "Gamma_34", "Gamma_21")
        bad = [r for r in rates if not getattr(self, r) > 0]
        if bad:
            raise DesignError(f"rates must be positive: {', '.join(bad)}")


@dataclass(frozen=True)
class ModeProfile:
    """Gaussian transverse mode ``psi(r) = exp(-r^2 / 2 sigma^2) / (sqrt(pi) sigma)``."""

    sigma: float
    shape: str = "gaussian"

    @classmethod
    def for_waveguide(cls, r_w: float) -> "ModeProfile":
        return cls(sigma=r_w / np.sqrt(2))

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-r ** 2 / (2 * self.sigma ** 2)) / (np.sqrt(np.pi) * self.sigma)


def susceptibility(x, p: SusceptibilityParams):
    x = np.asarray(x, dtype=float)
    chi = (p.chi_w + 1j * p.chi_i
           - np.exp(1j * p.phi_1) * p.chi_1 * np.cos(TWO_PI * x / p.d)
           - np.exp(1j * p.phi_2) * p.chi_2 * np.sin(np.pi * x / p.d))
    return chi if chi.ndim else complex(chi)


def rabi_profiles(x, p: SusceptibilityParams, a: AtomicConfig = AtomicConfig()):
    """Control and assistant Rabi frequencies (MHz) that realise the susceptibility."""
    x = np.asarray(x, dtype=float)
    first = np.cos(TWO_PI * x / p.d)
    second = np.sin(np.pi * x / p.d)

    def profile(omega0, omega1, phi_s):
        return (omega0
                + omega1 * p.chi_1 * np.cos(p.phi_1 + phi_s) * first
                + omega1 * p.chi_2 * np.cos(p.phi_2 + phi_s) * second)

    return (profile(a.Omega_c0, a.Omega_c1, a.phi_c),
            profile(a.Omega_a0, a.Omega_a1, a.phi_a))


# --- coupling overlap integrals ------------------------------------------

@dataclass(frozen=True)
class OverlapIntegrals:
    """chi-independent overlaps on ``[j d, (j+1) d]``: plain, cos- and sin-weighted."""
    plain: float
    cos: float
    sin: float
    error: float


def overlap_integrals(j: int, p: SusceptibilityParams, mode: ModeProfile,
                      epsabs: float = 1e-14, epsrel: float = 1e-10,
                      y_sigmas: float = 6.0) -> OverlapIntegrals:
    """Adaptive 2D quadrature of ``psi(r) w(x - j d) psi(|r - d e_x|)`` over cell ``j``."""
    d = p.d
    y_max = y_sigmas * mode.sigma
    weights = {
        "plain": lambda x: 1.0,
        "cos": lambda x: np.cos(TWO_PI * (x - j * d) / d),
        "sin": lambda x: np.sin(np.pi * (x - j * d) / d),
    }
    values, error = {}, 0.0
    for name, w in weights.items():
        def integrand(y, x, w=w):
            return mode(np.hypot(x, y)) * w(x) * mode(np.hypot(x - d, y))

        val, err = integrate.dblquad(integrand, j * d, (j + 1) * d, -y_max, y_max,
                                     epsabs=epsabs, epsrel=epsrel)
        if not np.isfinite(val) or err > max(epsabs, epsrel * abs(val)) * 1e3:
            raise QuadratureError(f"overlap '{name}' for j={j} did not converge (err {err:.3g})")
        values[name] = val
        error = max(error, err)
    return OverlapIntegrals(values["plain"], values["cos"], values["sin"], error)


def _combine(o: OverlapIntegrals, p: SusceptibilityParams) -> complex:
    # chi_w - chi_p(x - j d) = -i chi_i + e^{i phi1} chi1 cos + e^{i phi2} chi2 sin
    bracket = (-1j * p.chi_i * o.plain
               + np.exp(1j * p.phi_1) * p.chi_1 * o.cos
               + np.exp(1j * p.phi_2) * p.chi_2 * o.sin)
    return complex(p.k_p / 2j * bracket)


@dataclass(frozen=True)
class Couplings:
    kappa: complex
    kappa_prime: complex
    error: float
    overlaps: tuple[OverlapIntegrals, OverlapIntegrals] = field(repr=False, default=None)


def coupling_coefficients(p: SusceptibilityParams, mode: ModeProfile | None = None,
                          epsabs: float = 1e-14, epsrel: float = 1e-10,
                          y_sigmas: float = 6.0, overlaps=None) -> Couplings:
    """Intra-cell ``kappa`` (cell 0) and inter-cell ``kappa'`` (cell 1) couplings.

    ``overlaps`` may be passed back in to re-evaluate other ``chi`` values on the
    same geometry without repeating the quadrature.
    """
    mode = ModeProfile.for_waveguide(p.r_w) if mode is None else mode
    if overlaps is None:
        overlaps = tuple(overlap_integrals(j, p, mode, epsabs, epsrel, y_sigmas) for j in (0, 1))
    o0, o1 = overlaps
    scale = abs(p.k_p) / 2 * (abs(p.chi_i) + abs(p.chi_1) + abs(p.chi_2))
    return Couplings(_combine(o0, p), _combine(o1, p), scale * max(o0.error, o1.error),
                     overlaps)


def balanced_chi_2(p: SusceptibilityParams, target_ratio: float = 0.1,
                   mode: ModeProfile | None = None, overlaps=None) -> float:
    """``chi_2`` giving ``|kappa / kappa'| = target_ratio`` at fixed ``chi_1`` and phases.

    Both couplings are affine in ``chi_2``; of the two roots ``kappa = +-r kappa'``
    the one with smaller ``|chi_2|`` is returned.
    """
    c = coupling_coefficients(p, mode, overlaps=overlaps)
    base0 = _combine(c.overlaps[0], _with(p, chi_2=0.0))
    base1 = _combine(c.overlaps[1], _with(p, chi_2=0.0))
    unit = _with(p, chi_1=0.0, chi_i=0.0, chi_2=1.0)
    slope0 = _combine(c.overlaps[0], unit)
    slope1 = _combine(c.overlaps[1], unit)
    roots = []
    for t in (target_ratio, -target_ratio):
        denom = slope0 - t * slope1
        if denom != 0:
            roots.append(((t * base1 - base0) / denom).real)
    return float(min(roots, key=abs))


def _with(p: SusceptibilityParams, **changes) -> SusceptibilityParams:
    fields = asdict(p)
    fields.update(changes)
    fields["ratio_bound"] = np.inf
    return SusceptibilityParams(**fields)


@dataclass
class DesignReport:
    lattice: LatticeParams
    regime: SymmetryRegime          # from the susceptibility phases
    coupling_regime: SymmetryRegime  # read off the computed couplings
    topology: str                   # "trivial" or "nontrivial" from |kappa| vs |kappa'|
    quadrature_error: float
    assumptions: dict

    def to_dict(self) -> dict:
        k, kp = self.lattice.kappa, self.lattice.kappa_prime
        return {
            "kappa_re": k.real, "kappa_im": k.imag,
            "kappa_prime_re": kp.real, "kappa_prime_im": kp.imag,
            "delta": self.lattice.delta, "alpha": self.lattice.alpha,
            "regime": self.regime.label.value,
            "coupling_regime": self.coupling_regime.label.value,
            "topo": self.topology,
            "err_estimate": self.quadrature_error,
            "assumptions": dict(self.assumptions),
        }


def design_to_lattice(p: SusceptibilityParams, a: AtomicConfig | None = None,
                      mode: ModeProfile | None = None, delta: float = 1.5,
                      alpha: float = np.pi / 6, n_cells: int = 20,
                      overlaps=None) -> DesignReport:
    a = AtomicConfig() if a is None else a
    c = coupling_coefficients(p, mode, overlaps=overlaps)
    lattice = LatticeParams(delta, c.kappa, c.kappa_prime, alpha, n_cells)
    regime = classify_regime(p.chi_i, p.phi_1, p.phi_2)
    atol = 1e-6 * max(abs(c.kappa), abs(c.kappa_prime))
    from_couplings = coupling_regime(c.kappa, c.kappa_prime, atol=atol)
    topology = "nontrivial" if abs(c.kappa) < abs(c.kappa_prime) else "trivial"
    if regime.label is not Regime.NEITHER and from_couplings.label is not regime.label:
        raise DesignError(
            f"phase-selected regime {regime.label.value} but couplings give "
            f"{from_couplings.label.value}")
    return DesignReport(lattice, regime, from_couplings, topology, c.error, dict(ASSUMPTIONS))

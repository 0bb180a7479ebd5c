"""Nonlinear non-Hermitian quadrimer waveguide lattice."""

from .bloch import (
    Band,
    PTPhase,
    classify_pt_phase,
    dispersion,
    finite_spectrum,
    max_growth_rate,
    phase_boundaries,
    zak_phase,
)
from .config import ExperimentConfig, preset, validate_config
from .design import SusceptibilityParams, coupling_coefficients, design_to_lattice
from .dynamics import propagate, stability_spectrum
from .lattice import Boundary, LatticeParams, apply_linear, apply_rhs, pt_conjugate
from .runner import ResultBundle, run_experiment
from .stationary import Side, continue_family, linear_edge_state, newton_solve

__all__ = [
    "Band", "Boundary", "ExperimentConfig", "LatticeParams", "PTPhase", "ResultBundle",
    "Side", "SusceptibilityParams", "apply_linear", "apply_rhs", "classify_pt_phase",
    "continue_family", "coupling_coefficients", "design_to_lattice", "dispersion",
    "finite_spectrum", "linear_edge_state", "max_growth_rate", "newton_solve",
    "phase_boundaries", "preset", "propagate", "pt_conjugate", "run_experiment",
    "stability_spectrum", "validate_config", "zak_phase",
]

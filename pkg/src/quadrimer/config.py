"""Experiment configuration schema and canned presets."""

from __future__ import annotations

import json
import math
import re
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, model_validator

from .design import AtomicConfig, ModeProfile, SusceptibilityParams
from .lattice import Boundary, LatticeParams

KINDS = ("dispersion", "phases", "zak", "edge-families", "stability", "propagate",
         "design", "fig2a", "fig2c", "fig3")


def _parse_complex(v):
    """Accept a number, ``[re, im]``, ``{"re": .., "im": ..}`` or a string like ``"0.1j"``."""
    if isinstance(v, complex):
        return v
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, dict) and set(v) <= {"re", "im"}:
        return complex(float(v.get("re", 0.0)), float(v.get("im", 0.0)))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    raise ValueError("expected a number, [re, im], {re, im} or a complex string")


Complex = Annotated[complex, BeforeValidator(_parse_complex)]
Angle = Annotated[float, BeforeValidator(lambda v: _parse_angle(v))]


_ANGLE = re.compile(r"^([+-]?\d*\.?\d*)\*?pi(?:/(\d+(?:\.\d*)?))?$")


def _parse_angle(v):
    """Floats, or strings such as ``"pi/6"``, ``"-pi/2"``, ``"2*pi/3"``."""
    if not isinstance(v, str):
        return v
    s = v.replace(" ", "").lower()
    m = _ANGLE.match(s)
    if m is None:
        try:
            return float(s)
        except ValueError:
            raise ValueError(f"cannot parse angle {v!r}") from None
    coef = {"": 1.0, "+": 1.0, "-": -1.0}.get(m.group(1))
    coef = float(m.group(1)) if coef is None else coef
    return coef * math.pi / (float(m.group(2)) if m.group(2) else 1.0)


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class LatticeConfig(_Model):
    delta: float
    kappa: Complex
    kappa_prime: Complex
    alpha: Angle = math.pi / 6
    n_cells: int = Field(ge=1)
    boundary: Boundary = Boundary.FINITE

    def to_params(self) -> LatticeParams:
        return LatticeParams(self.delta, self.kappa, self.kappa_prime, self.alpha,
                             self.n_cells, self.boundary)


class SusceptibilityConfig(_Model):
    chi_w: float = 0.01
    chi_i: float = 0.0
    chi_1: float = 1e-4
    chi_2: Union[float, Literal["balanced"]] = "balanced"
    target_ratio: float = Field(0.1, gt=0)
    phi_1: Angle = math.pi / 2
    phi_2: Angle = -math.pi / 2
    d: float = Field(4.0, gt=0)
    r_w: float = Field(1.0, gt=0)
    k_p: Optional[float] = Field(None, gt=0)


class DesignConfig(_Model):
    susceptibility: SusceptibilityConfig = SusceptibilityConfig()
    atomic: dict = Field(default_factory=dict)
    mode_sigma: Optional[float] = Field(None, gt=0)
    delta: float = 1.5
    alpha: Angle = math.pi / 6
    n_cells: int = Field(20, ge=1)

    def atomic_config(self) -> AtomicConfig:
        return AtomicConfig(**self.atomic)

    def mode(self) -> ModeProfile:
        if self.mode_sigma is None:
            return ModeProfile.for_waveguide(self.susceptibility.r_w)
        return ModeProfile(self.mode_sigma)

    def susceptibility_params(self, chi_2: float) -> SusceptibilityParams:
        s = self.susceptibility
        kw = dict(chi_w=s.chi_w, chi_i=s.chi_i, chi_1=s.chi_1, chi_2=chi_2,
                  phi_1=s.phi_1, phi_2=s.phi_2, d=s.d, r_w=s.r_w)
        if s.k_p is not None:
            kw["k_p"] = s.k_p
        return SusceptibilityParams(**kw)


class SolverConfig(_Model):
    tol: float = Field(1e-10, gt=0)
    step: float = Field(1e-3, gt=0)
    min_step: float = Field(1e-6, gt=0)


class IntegratorConfig(_Model):
    step: float = Field(0.01, gt=0)
    z_max: float = Field(200.0, ge=0)
    noise: float = Field(1e-3, ge=0)
    sample_dz: float = Field(1.0, gt=0)
    gamma: Optional[float] = Field(None, ge=0)
    protected_cells: int = Field(3, ge=0)


class FamilySpec(_Model):
    side: Literal["left", "right"]
    nu: Angle = 0.0
    b_end: float


class SweepConfig(_Model):
    kappa: float = 1.0
    kappa_prime: tuple[float, float] = (0.0, 2.0)
    delta: tuple[float, float] = (0.0, 2.0)
    n: int = Field(101, ge=2)
    n_q: int = Field(1001, ge=8)


class ExperimentConfig(_Model):
    kind: Literal[KINDS]
    lattice: Optional[LatticeConfig] = None
    design: Optional[DesignConfig] = None
    solver: SolverConfig = SolverConfig()
    integrator: IntegratorConfig = IntegratorConfig()
    families: list[FamilySpec] = Field(default_factory=list)
    sweep: SweepConfig = SweepConfig()
    mode_b: Optional[float] = None
    grid_size: int = Field(2001, ge=8)
    output_dir: str = "results"
    seed: int = 0
    threads: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _needs_inputs(self):
        if self.kind == "design" and self.design is None:
            self.design = DesignConfig()
        needs_lattice = ("dispersion", "zak", "edge-families", "stability", "propagate")
        if self.kind in needs_lattice and self.lattice is None:
            raise ValueError(f"kind '{self.kind}' requires a 'lattice' section")
        return self


class ConfigError(ValueError):
    def __init__(self, errors: list[dict]):
        self.errors = errors
        lines = [f"{e['path']}: {e['message']}" for e in errors]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


def validate_config(raw: bytes | str | dict) -> ExperimentConfig:
    """Parse and validate; all schema errors are collected into one :class:`ConfigError`."""
    if isinstance(raw, (bytes, str)):
        try:
            data = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([{"path": "<root>", "message": f"invalid JSON: {exc}"}]) from exc
    else:
        data = raw
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        errors = [{"path": ".".join(str(p) for p in e["loc"]) or "<root>",
                   "message": e["msg"], "input": e.get("input")}
                  for e in exc.errors()]
        raise ConfigError(errors) from None


FIG2_LATTICE = {"delta": 1.5, "kappa": 0.1, "kappa_prime": 1.0, "alpha": "pi/6", "n_cells": 20}

PRESETS: dict[str, dict] = {
    "fig2a": {
        "kind": "fig2a",
        "lattice": FIG2_LATTICE,
        "families": [
            {"side": "left", "nu": 0.0, "b_end": -1.0},
            {"side": "left", "nu": "pi/4", "b_end": -1.0},
            {"side": "right", "nu": 0.0, "b_end": 3.0},
            {"side": "right", "nu": "pi/4", "b_end": 3.0},
        ],
        "mode_b": -1.25,
        "integrator": {"z_max": 200.0, "noise": 1e-3},
    },
    "fig2c": {
        "kind": "fig2c",
        "lattice": {"delta": 0.0, "kappa": [0.0, 0.1], "kappa_prime": [0.0, 1.0],
                    "alpha": "pi/6", "n_cells": 20},
        "families": [
            {"side": "left", "nu": 0.0, "b_end": 0.8},
            {"side": "right", "nu": 0.0, "b_end": 0.8},
        ],
        "integrator": {"z_max": 100.0, "noise": 0.0},
    },
    "fig3a": {
        "kind": "fig3",
        "lattice": {**FIG2_LATTICE, "delta": 1.0},
        "families": [
            {"side": "left", "nu": 0.0, "b_end": 0.0},
            {"side": "left", "nu": "pi/4", "b_end": 0.0},
        ],
        "mode_b": -0.9,
        "integrator": {"z_max": 60.0, "noise": 1e-3, "sample_dz": 0.1},
    },
    "fig3b": {
        "kind": "fig3",
        "lattice": {**FIG2_LATTICE, "delta": 1.0},
        "families": [{"side": "left", "nu": 0.0, "b_end": -0.9}],
        "mode_b": -0.9,
        "integrator": {"z_max": 1000.0, "noise": 1e-3, "gamma": 0.5, "protected_cells": 3},
    },
}


def preset(name: str, **overrides) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError([{"path": "preset", "message": f"unknown preset {name!r}; "
                            f"choose from {sorted(PRESETS)}"}])
    data = json.loads(json.dumps(PRESETS[name]))
    data.update(overrides)
    return validate_config(data)

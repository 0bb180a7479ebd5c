"""Experiment pipelines: config in, CSV/JSON tables out."""

from __future__ import annotations

import logging
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import io
from .bloch import (
    Band,
    RegimeError,
    classify_pt_phase,
    dispersion,
    finite_spectrum,
    max_growth_rate,
    q_grid,
    zak_phase,
)
from .config import ExperimentConfig, FamilySpec
from .design import ASSUMPTIONS, balanced_chi_2, coupling_coefficients, design_to_lattice, rabi_profiles
from .dynamics import (
    absorption_mask,
    fit_growth_rate,
    propagate,
    stability_spectrum,
)
from .lattice import LatticeParams, coupling_regime
from .stationary import (
    ModeFamily,
    Side,
    StationaryMode,
    continue_family,
    linear_edge_state,
    newton_solve,
)

log = logging.getLogger(__name__)

# fields that do not affect the numbers and are left out of the manifest hash
_UNHASHED = ("output_dir", "threads")


class ExperimentError(RuntimeError):
    """A pipeline stage failed; the original exception is kept as ``__cause__``."""

    def __init__(self, kind: str, stage: str, exc: BaseException):
        self.kind, self.stage = kind, stage
        super().__init__(f"{kind}: stage '{stage}' failed: {type(exc).__name__}: {exc}")


@dataclass
class Table:
    header: list[str]
    rows: list[tuple]


@dataclass
class ResultBundle:
    manifest: dict
    tables: dict[str, Table] = field(default_factory=dict)
    reports: dict[str, dict] = field(default_factory=dict)
    text: dict[str, list[str]] = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)


def manifest_hash(config: ExperimentConfig) -> str:
    return io.config_hash(config.model_dump(mode="json", exclude=set(_UNHASHED)))


def _versions() -> dict:
    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "pydantic", "artifact"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


class _Run:
    """Mutable state of one experiment: bundle under construction plus stage timer."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.pool = ThreadPoolExecutor(max_workers=config.threads)
        self.timings: dict[str, float] = {}
        self.bundle = ResultBundle(manifest={})

    def stage(self, name, fn, *args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        except ExperimentError:
            raise
        except Exception as exc:
            raise ExperimentError(self.config.kind, name, exc) from exc
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def map(self, fn, items):
        # executor.map yields in submission order, so output never depends on scheduling
        return list(self.pool.map(fn, items))


# --- stages ---------------------------------------------------------------

def _spectrum(run: _Run, params: LatticeParams, name="spectrum"):
    b = finite_spectrum(params)
    run.bundle.tables[name] = Table(["index", "re_b", "im_b"],
                                    [(k, v.real, v.imag) for k, v in enumerate(b)])
    return b


def _bands(run: _Run, params: LatticeParams):
    qs = q_grid(run.config.grid_size)
    bt = dispersion(params, qs)
    run.bundle.tables["bands"] = Table(["q", "re_b", "im_b"],
                                       [(q, v.real, v.imag) for q, v in zip(qs, bt)])


def _phase_report(run: _Run, params: LatticeParams):
    report = {"delta": params.delta, "kappa": params.kappa, "kappa_prime": params.kappa_prime,
              "regime": coupling_regime(params.kappa, params.kappa_prime).label.value}
    try:
        label = classify_pt_phase(params)
        report.update(phase=label.phase.value, delta1=label.delta1, delta2=label.delta2)
    except RegimeError:
        report["phase"] = None
    report["max_growth_rate"] = max_growth_rate(params, run.config.sweep.n_q)
    run.bundle.reports["phase"] = report
    return report


def _zak(run: _Run, params: LatticeParams):
    report = {}
    for band in Band:
        z = zak_phase(params, band, run.config.grid_size)
        report[band.value] = {"phase": z.phase, "complex_phase": z.complex_phase,
                              "phase_h": z.phase_h, "complex_phase_h": z.complex_phase_h,
                              "wilson_phases": z.wilson_phases, "grid_size": z.grid_size}
    run.bundle.reports["zak"] = report
    return report


def _phase_diagram(run: _Run):
    sw = run.config.sweep
    kps = np.linspace(*sw.kappa_prime, sw.n)
    deltas = np.linspace(*sw.delta, sw.n)
    alpha = run.config.lattice.alpha if run.config.lattice else np.pi / 6

    def row_block(kp):
        return [(kp, d, max_growth_rate(LatticeParams(d, sw.kappa, kp, alpha), sw.n_q))
                for d in deltas]

    rows = [r for block in run.map(row_block, kps) for r in block]
    run.bundle.tables["phase_diagram"] = Table(["kappa_prime", "delta", "max_im_b"], rows)


def _family_label(k: int, spec: FamilySpec, suffix: str = "") -> str:
    return f"family{k}_{spec.side}{suffix}"


def _families(run: _Run, params: LatticeParams, specs, suffix: str = "") -> list[ModeFamily]:
    sol = run.config.solver

    def one(spec):
        return continue_family(params, Side(spec.side), spec.nu, spec.b_end,
                               step=sol.step, min_step=sol.min_step, tol=sol.tol)

    families = run.map(one, specs)
    for k, (spec, fam) in enumerate(zip(specs, families)):
        run.bundle.reports.setdefault("families", {})[_family_label(k, spec, suffix)] = {
            "side": spec.side, "nu": spec.nu, "n_points": len(fam),
            "b_first": fam.b[0], "b_last": fam.b[-1], "termination": fam.termination.value,
        }
    return families


def _family_stability(run: _Run, params: LatticeParams, specs, families, suffix: str = ""):
    for k, (spec, fam) in enumerate(zip(specs, families)):
        reports = run.map(lambda m: stability_spectrum(params, m), fam.modes)
        label = _family_label(k, spec, suffix)
        run.bundle.tables[label] = Table(
            ["b", "P", "stable"], [(m.b, m.power, r.stable) for m, r in zip(fam.modes, reports)])
        run.bundle.text[f"stability_{label}"] = [
            "b max_growth verdict",
            *(f"{io.fmt(r.b)} {io.fmt(r.max_growth)} {r.verdict.value}" for r in reports)]


def _mode_at(params: LatticeParams, families: list[ModeFamily], b: float) -> StationaryMode:
    """Converge the mode at ``b`` from the closest point of the first family covering it."""
    for fam in families:
        bs = fam.b
        if bs.min() - 1e-12 <= b <= bs.max() + 1e-12:
            guess = fam.modes[int(np.argmin(np.abs(bs - b)))]
            return newton_solve(params, guess.state, b, side=guess.side, seed_nu=guess.seed_nu)
    raise ValueError(f"no continued family reaches b = {b}")


def _initial_mode(run: _Run, params: LatticeParams, families) -> StationaryMode:
    if run.config.mode_b is not None:
        return _mode_at(params, families, run.config.mode_b)
    if families:
        fam = families[0]
        return fam.modes[len(fam) // 2]
    return linear_edge_state(params, Side.LEFT, 0)


def _profile(run: _Run, mode: StationaryMode):
    run.bundle.tables["profile"] = Table(["cell", *io.AMPLITUDE_COLUMNS],
                                         list(io.state_rows(mode.state)))
    run.bundle.reports["mode"] = {"b": mode.b, "P": mode.power, "residual": mode.residual,
                                  "side": None if mode.side is None else Side(mode.side).value}


def _mode_stability(run: _Run, params: LatticeParams, mode: StationaryMode, mask=None):
    rep = stability_spectrum(params, mode, gamma_mask=mask)
    key = "stability" if mask is None else "stability_absorbed"
    run.bundle.text[key] = ["b max_growth verdict",
                            f"{io.fmt(rep.b)} {io.fmt(rep.max_growth)} {rep.verdict.value}"]
    return rep


def _propagation(run: _Run, params: LatticeParams, mode: StationaryMode, mask=None,
                 name="propagation"):
    integ = run.config.integrator
    side = Side(mode.side) if mode.side is not None else Side.LEFT
    res = propagate(params, mode.state, integ.z_max, integ.step, gamma_mask=mask,
                    noise_amplitude=integ.noise, rng_seed=run.config.seed,
                    sample_dz=integ.sample_dz, edge_side=side,
                    edge_cells=max(integ.protected_cells, 1))
    rows, heat = [], []
    for z, snap in zip(res.z, res.snapshots):
        rows.extend(io.state_rows(snap, prefix=(z,)))
        heat.extend((z, j, a) for j, a in enumerate(np.sqrt(np.sum(np.abs(snap) ** 2, axis=1))))
    t = run.bundle.tables
    t[name] = Table(["z", "cell", *io.AMPLITUDE_COLUMNS], rows)
    t[f"{name}_heatmap"] = Table(["z", "cell", "abs_a"], heat)
    t[f"{name}_trace"] = Table(["z", "P", "deviation", "edge_deviation"],
                               list(zip(res.z, res.power, res.deviation, res.edge_deviation)))
    report = {"z_max": integ.z_max, "step": res.step, "noise": integ.noise,
              "seed": run.config.seed, "blowup_z": res.blowup_z,
              "step_error_per_z": res.step_error_per_z,
              "max_deviation": float(res.deviation.max()),
              "max_edge_deviation": float(res.edge_deviation.max()),
              "power_drift": float(np.max(np.abs(res.power - res.power[0])))}
    if mask is None and integ.noise > 0:
        try:
            report["fitted_growth_rate"] = fit_growth_rate(res.z, res.deviation)
        except ValueError:
            report["fitted_growth_rate"] = None
    run.bundle.reports[name] = report
    return res


def _design(run: _Run):
    dc = run.config.design
    mode = dc.mode()
    s = dc.susceptibility
    probe = dc.susceptibility_params(s.chi_1 if s.chi_2 == "balanced" else s.chi_2)
    overlaps = coupling_coefficients(probe, mode).overlaps
    chi_2 = (balanced_chi_2(probe, s.target_ratio, mode, overlaps)
             if s.chi_2 == "balanced" else s.chi_2)
    sp = dc.susceptibility_params(chi_2)
    atomic = dc.atomic_config()
    report = design_to_lattice(sp, atomic, mode, dc.delta, dc.alpha, dc.n_cells, overlaps)
    d = report.to_dict()
    run.bundle.tables["design"] = Table(
        ["kappa_re", "kappa_im", "kappa_prime_re", "kappa_prime_im", "regime", "topo",
         "err_estimate"],
        [tuple(d[k] for k in ("kappa_re", "kappa_im", "kappa_prime_re", "kappa_prime_im",
                              "regime", "topo", "err_estimate"))])
    x = np.linspace(0.0, 2 * sp.d, 201)
    omega_c, omega_a = rabi_profiles(x, sp, atomic)
    run.bundle.tables["rabi"] = Table(["x", "omega_c", "omega_a"], list(zip(x, omega_c, omega_a)))
    d.update(chi_2=chi_2, sigma=mode.sigma)
    run.bundle.reports["design"] = d
    run.bundle.flags.update({f"design.{k}": v for k, v in ASSUMPTIONS.items()})
    return report


# --- pipelines ------------------------------------------------------------

def _run_kind(run: _Run):
    cfg = run.config
    kind = cfg.kind
    params = cfg.lattice.to_params() if cfg.lattice is not None else None
    st = run.stage

    if kind == "dispersion":
        st("bands", _bands, run, params)
    elif kind == "phases":
        if params is not None:
            st("phase", _phase_report, run, params)
        st("phase_diagram", _phase_diagram, run)
    elif kind == "zak":
        st("zak", _zak, run, params)
    elif kind == "design":
        st("design", _design, run)
    elif kind in ("edge-families", "stability"):
        fams = st("families", _families, run, params, cfg.families)
        if kind == "edge-families" or cfg.mode_b is None:
            st("stability", _family_stability, run, params, cfg.families, fams)
        if cfg.mode_b is not None:
            mode = st("mode", _initial_mode, run, params, fams)
            st("profile", _profile, run, mode)
            st("stability", _mode_stability, run, params, mode)
    elif kind == "propagate":
        fams = st("families", _families, run, params, cfg.families)
        mode = st("mode", _initial_mode, run, params, fams)
        st("profile", _profile, run, mode)
        mask = _mask(cfg, params, mode)
        st("propagation", _propagation, run, params, mode, mask)
    elif kind in ("fig2a", "fig2c", "fig3"):
        _figure(run, params)
    else:  # pragma: no cover - rejected by the schema
        raise ValueError(f"unknown kind {kind}")


def _mask(cfg: ExperimentConfig, params: LatticeParams, mode: StationaryMode):
    integ = cfg.integrator
    if integ.gamma is None:
        return None
    side = Side(mode.side) if mode.side is not None else Side.LEFT
    return absorption_mask(params, side, integ.protected_cells, integ.gamma)


def _figure(run: _Run, params: LatticeParams):
    """spectrum -> families -> stability -> propagation, plus figure-specific extras."""
    cfg, st = run.config, run.stage
    st("spectrum", _spectrum, run, params)
    st("bands", _bands, run, params)
    if cfg.kind == "fig2c":
        st("zak", _zak, run, params)
    else:
        st("phase", _phase_report, run, params)
    fams = st("families", _families, run, params, cfg.families)
    st("stability", _family_stability, run, params, cfg.families, fams)
    if cfg.kind == "fig2c":
        # a nonzero detuning splits the L/R degeneracy of the Hermitian chain
        lifted = params.with_(delta=0.5)
        st("spectrum", _spectrum, run, lifted, "spectrum_delta0.5")
        specs = [s.model_copy(update={"b_end": max(s.b_end, 0.5 + cfg.solver.step)})
                 for s in cfg.families]
        fams_l = st("families", _families, run, lifted, specs, "_delta0.5")
        st("stability", _family_stability, run, lifted, specs, fams_l, "_delta0.5")
    if cfg.kind == "fig3":
        st("phase_diagram", _phase_diagram, run)
    mode = st("mode", _initial_mode, run, params, fams)
    st("profile", _profile, run, mode)
    st("mode_stability", _mode_stability, run, params, mode)
    mask = _mask(cfg, params, mode)
    if mask is not None:
        st("mode_stability", _mode_stability, run, params, mode, mask)
    st("propagation", _propagation, run, params, mode, mask)


def run_experiment(config: ExperimentConfig, out_dir: str | Path | None = None,
                   write: bool = True) -> ResultBundle:
    """Run the pipeline named by ``config.kind``; write artifacts unless ``write`` is False."""
    run = _Run(config)
    t0 = time.perf_counter()
    try:
        _run_kind(run)
    finally:
        run.pool.shutdown()
    digest = manifest_hash(config)
    bundle = run.bundle
    bundle.flags.update({
        "stability.zero_window": 1e-4,
        "growth_fit.prefactor_exponent": 0.25,
        "bands.branch": "+b~ with Re >= 0 (lower band is its negative)",
    })
    bundle.manifest = {
        "config": config.model_dump(mode="json"),
        "config_sha256": digest,
        "seed": config.seed,
        "versions": _versions(),
        "timings": {**run.timings, "total": time.perf_counter() - t0},
        "tables": sorted(bundle.tables),
        "reports": sorted(bundle.reports),
        "flags": bundle.flags,
    }
    if write:
        out = Path(config.output_dir if out_dir is None else out_dir)
        bundle.files = write_bundle(bundle, out, digest, config.seed)
    return bundle


def write_bundle(bundle: ResultBundle, out: Path, digest: str, seed: int) -> list[Path]:
    files = []
    for name, table in sorted(bundle.tables.items()):
        files.append(io.write_csv(out / f"{name}.csv", table.header, table.rows, digest, seed))
    for name, lines in sorted(bundle.text.items()):
        files.append(io.write_text(out / f"{name}.txt", lines, digest, seed))
    for name, report in sorted(bundle.reports.items()):
        files.append(io.write_json(out / f"{name}.json", {"seed": seed, **report}, digest))
    files.append(io.write_json(out / "manifest.json", bundle.manifest, digest))
    return files

import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quadrimer import io
from quadrimer.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_PARAMETER, exit_code, main
from quadrimer.config import PRESETS, ConfigError, preset, validate_config
from quadrimer.runner import ExperimentError, manifest_hash, run_experiment
from quadrimer.stationary import NewtonDivergenceError

SMALL_LATTICE = {"delta": 1.5, "kappa": 0.1, "kappa_prime": 1.0, "n_cells": 20}


def test_missing_field_is_named():
    with pytest.raises(ConfigError) as err:
        validate_config({"kind": "dispersion", "lattice": {"delta": 1, "kappa": 0.1,
                                                           "kappa_prime": 1}})
    assert [e["path"] for e in err.value.errors] == ["lattice.n_cells"]


def test_all_errors_are_collected():
    raw = json.dumps({"kind": "propagate", "lattice": SMALL_LATTICE,
                      "solver": {"step": -1e-3}, "integrator": {"noise": -1}})
    with pytest.raises(ConfigError) as err:
        validate_config(raw.encode())
    paths = {e["path"] for e in err.value.errors}
    assert paths == {"solver.step", "integrator.noise"}
    assert "greater than 0" in str(err.value)


def test_unknown_fields_and_bad_json_rejected():
    with pytest.raises(ConfigError):
        validate_config({"kind": "zak", "lattice": SMALL_LATTICE, "bogus": 1})
    with pytest.raises(ConfigError):
        validate_config(b"{not json")
    with pytest.raises(ConfigError):
        validate_config({"kind": "nonsense"})


def test_preset_echoes_alpha():
    cfg = preset("fig2a")
    assert_allclose(cfg.lattice.alpha, math.pi / 6, rtol=1e-15)
    assert cfg.lattice.to_params().alpha == math.pi / 6
    for name in PRESETS:
        assert preset(name).lattice.alpha == math.pi / 6


@pytest.mark.parametrize("text, value", [("pi/6", math.pi / 6), ("-pi/2", -math.pi / 2),
                                         ("2*pi/3", 2 * math.pi / 3), ("0.25", 0.25)])
def test_angle_strings(text, value):
    cfg = validate_config({"kind": "zak", "lattice": {**SMALL_LATTICE, "alpha": text}})
    assert_allclose(cfg.lattice.alpha, value, rtol=1e-15)


def test_complex_couplings_forms():
    for form in ([0.0, 0.1], {"im": 0.1}, "0.1j"):
        cfg = validate_config({"kind": "zak", "lattice": {**SMALL_LATTICE, "kappa": form}})
        assert cfg.lattice.kappa == 0.1j


def test_hash_ignores_output_location():
    a = preset("fig2a", output_dir="x", threads=1)
    b = preset("fig2a", output_dir="y", threads=4)
    assert manifest_hash(a) == manifest_hash(b)
    assert manifest_hash(a) != manifest_hash(preset("fig2a", seed=1))


def test_flat_bands_without_coupling(tmp_path):
    cfg = validate_config({"kind": "dispersion", "grid_size": 16,
                           "lattice": {"delta": 0.7, "kappa": 0, "kappa_prime": 0, "n_cells": 4}})
    bundle = run_experiment(cfg, tmp_path)
    stamp, header, table = io.read_csv(tmp_path / "bands.csv")
    assert header == ["q", "re_b", "im_b"]
    assert_allclose(table[:, 1], 0.7)
    assert_allclose(table[:, 2], 0)
    assert stamp == bundle.manifest["config_sha256"]


def test_every_file_carries_the_hash(tmp_path):
    cfg = validate_config({"kind": "zak", "grid_size": 64,
                           "lattice": {"delta": 0.0, "kappa": 0.1, "kappa_prime": 1.0,
                                       "n_cells": 20}})
    bundle = run_experiment(cfg, tmp_path)
    digest = manifest_hash(cfg)
    for path in bundle.files:
        text = path.read_text()
        if path.suffix == ".json":
            assert json.loads(text)["manifest_sha256"] == digest
        else:
            assert text.startswith(f"# manifest_sha256={digest}")
    zak = json.loads((tmp_path / "zak.json").read_text())
    assert_allclose(zak["lower"]["phase"], math.pi, atol=1e-3)


def test_floats_round_trip(tmp_path):
    values = [math.pi, 1 / 3, 1e-300, -2.5e17, 0.1 + 0.2]
    io.write_csv(tmp_path / "t.csv", ["x"], [(v,) for v in values], "abc")
    _, _, table = io.read_csv(tmp_path / "t.csv")
    assert list(table[:, 0]) == values


def test_phases_sweep(tmp_path):
    cfg = validate_config({"kind": "phases",
                           "sweep": {"kappa": 1.0, "kappa_prime": [0, 2], "delta": [0, 2],
                                     "n": 11, "n_q": 101}})
    run_experiment(cfg, tmp_path)
    _, header, table = io.read_csv(tmp_path / "phase_diagram.csv")
    assert header == ["kappa_prime", "delta", "max_im_b"]
    assert table.shape == (121, 3)
    # unbroken iff delta > kappa + kappa'
    unbroken = table[:, 1] > 1.0 + table[:, 0] + 1e-12
    assert np.all(table[unbroken, 2] == 0)
    assert np.all(table[table[:, 1] < np.abs(1.0 - table[:, 0]) - 1e-12, 2] > 0)


def propagate_config(tmp, threads):
    return validate_config({
        "kind": "propagate", "lattice": {**SMALL_LATTICE, "delta": 1.0},
        "families": [{"side": "left", "nu": 0, "b_end": -0.9}],
        "solver": {"step": 1e-2}, "mode_b": -0.95,
        "integrator": {"z_max": 5.0, "noise": 1e-3, "sample_dz": 0.5},
        "seed": 11, "threads": threads, "output_dir": str(tmp)})


def test_runs_are_bitwise_reproducible(tmp_path):
    a = run_experiment(propagate_config(tmp_path / "a", 1))
    b = run_experiment(propagate_config(tmp_path / "b", 3))
    names = sorted(p.name for p in a.files if p.name != "manifest.json")
    assert names == sorted(p.name for p in b.files if p.name != "manifest.json")
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "seed=11" in (tmp_path / "a" / "propagation.csv").read_text().splitlines()[0]


def test_edge_families_table(tmp_path):
    cfg = validate_config({
        "kind": "edge-families", "lattice": SMALL_LATTICE, "solver": {"step": 1e-2},
        "families": [{"side": "left", "nu": 0, "b_end": -1.0}]})
    bundle = run_experiment(cfg, tmp_path)
    _, header, table = io.read_csv(tmp_path / "family0_left.csv")
    assert header == ["b", "P", "stable"]
    assert table[0, 0] > -1.5 and abs(table[-1, 0] + 1.2) <= 1e-2
    assert np.all(table[:, 2] == 1)
    assert bundle.reports["families"]["family0_left"]["termination"] == "band_edge"


def test_design_kind_defaults(tmp_path):
    bundle = run_experiment(validate_config({"kind": "design"}), tmp_path)
    _, header, _ = io.read_csv(tmp_path / "design.csv")
    assert header == ["kappa_re", "kappa_im", "kappa_prime_re", "kappa_prime_im", "regime",
                      "topo", "err_estimate"]
    assert bundle.reports["design"]["regime"] == "odd_pt"
    assert bundle.reports["design"]["topo"] == "nontrivial"


def test_errors_are_wrapped_with_context(tmp_path):
    cfg = validate_config({"kind": "edge-families",
                           "lattice": {**SMALL_LATTICE, "kappa": 1.0, "kappa_prime": 0.1},
                           "families": [{"side": "left", "nu": 0, "b_end": -1.0}]})
    with pytest.raises(ExperimentError) as err:
        run_experiment(cfg, tmp_path)
    assert err.value.stage == "families"
    assert exit_code(err.value) == EXIT_PARAMETER


def test_exit_codes():
    assert exit_code(ConfigError([])) == EXIT_CONFIG
    wrapped = ExperimentError("fig2a", "families", NewtonDivergenceError("x"))
    wrapped.__cause__ = NewtonDivergenceError("x")
    assert exit_code(wrapped) == EXIT_NUMERICAL
    assert exit_code(RuntimeError("?")) == 1


def test_cli_end_to_end(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "dispersion", "lattice": SMALL_LATTICE, "grid_size": 8}))
    assert main(["dispersion", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--seed", "3"]) == 0
    assert (tmp_path / "o" / "bands.csv").exists()
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert main(["validate", str(cfg)]) == 0
    assert main(["dispersion", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"kind": "dispersion", "lattice": {"delta": 1}}))
    assert main(["dispersion", "--config", str(bad)]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "lattice.kappa" in err and "lattice.n_cells" in err


def test_cli_preset_with_other_kind(tmp_path):
    # a preset supplies parameters; the subcommand picks the pipeline
    assert main(["zak", "--preset", "fig2c", "--out", str(tmp_path)]) == 0
    zak = json.loads((tmp_path / "zak.json").read_text())
    assert_allclose(zak["lower"]["phase"], math.pi, atol=1e-3)

"""Command line entry point: ``quadrimer <kind> [--config PATH | --preset NAME] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bloch import DegenerateSpectrumError
from .config import KINDS, PRESETS, ConfigError, ExperimentConfig, validate_config
from .design import DesignError, QuadratureError
from .lattice import LatticeError
from .runner import ExperimentError, run_experiment
from .stationary import (
    BifurcationPointError,
    ContinuationError,
    NewtonDivergenceError,
    NoEdgeStateError,
    UnsupportedBranchError,
)

EXIT_OTHER = 1
EXIT_CONFIG = 2
EXIT_PARAMETER = 3
EXIT_NUMERICAL = 4

_PARAMETER_ERRORS = (LatticeError, DesignError, NoEdgeStateError, UnsupportedBranchError)
_NUMERICAL_ERRORS = (NewtonDivergenceError, BifurcationPointError, ContinuationError,
                     QuadratureError, DegenerateSpectrumError, np.linalg.LinAlgError)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    cause = exc.__cause__ if isinstance(exc, ExperimentError) else exc
    if isinstance(cause, _PARAMETER_ERRORS):
        return EXIT_PARAMETER
    if isinstance(cause, _NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    return EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quadrimer", description="Nonlinear non-Hermitian quadrimer lattice experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="kind", required=True, metavar="KIND")
    for kind in KINDS:
        p = sub.add_parser(kind, help=f"run the '{kind}' experiment")
        p.add_argument("--config", type=Path, help="experiment config JSON")
        p.add_argument("--preset", choices=sorted(PRESETS), help="canned figure parameters")
        p.add_argument("--out", type=Path, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config)")
        p.add_argument("--threads", type=int, help="worker threads (overrides config)")
    v = sub.add_parser("validate", help="check a config file and print the parsed result")
    v.add_argument("config", type=Path)
    return parser


def _read(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise ConfigError([{"path": "<cli>", "message": str(exc)}]) from exc


def load_config(args) -> ExperimentConfig:
    if args.config is not None and args.preset is not None:
        raise ConfigError([{"path": "<cli>", "message": "--config and --preset are exclusive"}])
    if args.config is not None:
        try:
            raw = json.loads(_read(args.config))
        except json.JSONDecodeError as exc:
            raise ConfigError([{"path": "<root>", "message": f"invalid JSON: {exc}"}]) from exc
    elif args.preset is not None:
        raw = json.loads(json.dumps(PRESETS[args.preset]))
    else:
        raw = {}
    # the subcommand names the pipeline; a preset only supplies parameters
    raw["kind"] = args.kind
    for key in ("seed", "threads"):
        if getattr(args, key) is not None:
            raw[key] = getattr(args, key)
    if args.out is not None:
        raw["output_dir"] = str(args.out)
    return validate_config(raw)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.kind == "validate":
            cfg = validate_config(_read(args.config))
            print(json.dumps(cfg.model_dump(mode="json"), indent=2))
            return 0
        cfg = load_config(args)
        bundle = run_experiment(cfg)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    for path in bundle.files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

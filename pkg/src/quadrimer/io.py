"""CSV / JSON writers; every file is stamped with the hash of its generating config."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def config_hash(config_dict: dict) -> str:
    blob = json.dumps(config_dict, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, complex) or isinstance(obj, np.complexfloating):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if hasattr(obj, "value"):  # enums
        return obj.value
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def stamp_line(manifest_hash: str, seed: int | None = None) -> str:
    line = f"# manifest_sha256={manifest_hash}"
    return line if seed is None else f"{line} seed={seed}"


def write_csv(path: Path, header: list[str], rows, manifest_hash: str,
              seed: int | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as fh:
        fh.write(stamp_line(manifest_hash, seed) + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def read_csv(path: Path) -> tuple[str, list[str], np.ndarray]:
    """Return ``(manifest_hash, header, float table)``; non-numeric columns become NaN."""
    lines = Path(path).read_text().splitlines()
    stamp = lines[0].split("=", 1)[1].split()[0]
    header = lines[1].split(",")

    def num(v):
        try:
            return float(v)
        except ValueError:
            return np.nan

    table = np.array([[num(v) for v in ln.split(",")] for ln in lines[2:]], dtype=float)
    return stamp, header, table.reshape(-1, len(header))


def write_json(path: Path, obj: dict, manifest_hash: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {"manifest_sha256": manifest_hash, **obj}
    path.write_text(json.dumps(payload, indent=2, default=_jsonable) + "\n")
    return path


def write_text(path: Path, lines: list[str], manifest_hash: str,
               seed: int | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join([stamp_line(manifest_hash, seed), *lines]) + "\n")
    return path


def state_rows(state, prefix=()):
    """Rows ``(*prefix, cell, re_a1, im_a1, ..., re_a4, im_a4)``."""
    for j, cell in enumerate(np.asarray(state)):
        vals = []
        for a in cell:
            vals += [a.real, a.imag]
        yield (*prefix, j, *vals)


AMPLITUDE_COLUMNS = [f"{part}_a{k}" for k in range(1, 5) for part in ("re", "im")]

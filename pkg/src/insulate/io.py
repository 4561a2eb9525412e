"""Plain-text artifact formats: grid dumps, trace tables and the run manifest.

Grid dump (``.grid``)::

    IFGRID v1 <nx> <ny> <x0> <y0> <dx> <dy>
    <nx values of row 0 (lowest y)>
    ...
    <nx values of row ny-1>

Numbers are written with 17 significant digits, so a dump read back gives
the identical doubles.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import PreconditionError
from .grid import GridField

GRID_MAGIC = "IFGRID"
GRID_VERSION = "v1"
TRACE_HEADER = ("iter", "total", "dirichlet", "surface", "volume", "grad_norm")


def _g(x: float) -> str:
    return "%.17g" % x


def write_grid(path, field: GridField) -> Path:
    path = Path(path)
    head = [GRID_MAGIC, GRID_VERSION, str(field.nx), str(field.ny),
            *(_g(v) for v in (*field.origin, *field.spacing))]
    lines = [" ".join(head)]
    lines += [" ".join(_g(v) for v in row) for row in np.asarray(field.values, dtype=float)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_grid(path) -> GridField:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise PreconditionError(f"{path}: empty grid file")
    head = lines[0].split()
    if len(head) != 8 or head[0] != GRID_MAGIC or head[1] != GRID_VERSION:
        raise PreconditionError(f"{path}:1: expected '{GRID_MAGIC} {GRID_VERSION} nx ny x0 y0 dx dy'")
    try:
        nx, ny = int(head[2]), int(head[3])
        x0, y0, dx, dy = (float(v) for v in head[4:])
    except ValueError as exc:
        raise PreconditionError(f"{path}:1: malformed header ({exc})") from None
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != ny:
        raise PreconditionError(f"{path}: expected {ny} value rows, found {len(rows)}")
    vals = np.empty((ny, nx))
    for j, ln in enumerate(rows):
        parts = ln.split()
        if len(parts) != nx:
            raise PreconditionError(f"{path}:{j + 2}: expected {nx} values, found {len(parts)}")
        try:
            vals[j] = [float(v) for v in parts]
        except ValueError as exc:
            raise PreconditionError(f"{path}:{j + 2}: {exc}") from None
    return GridField(nx, ny, (x0, y0), (dx, dy), vals)


def write_trace(path, rows) -> Path:
    """Write ``(iter, EnergyBreakdown, grad_norm)`` rows as the standard trace CSV."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for it, e, g in rows:
            w.writerow([it, _g(e.total), _g(e.dirichlet), _g(e.surface), _g(e.volume), _g(g)])
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_g(v) if isinstance(v, float) else v for v in row])
    return path


def read_table(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def sha256(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out_dir, *, config: dict, version: str, seed: int, wall_time: float,
                   artifacts) -> Path:
    out_dir = Path(out_dir)
    entries = [{"path": Path(a).name, "sha256": sha256(a)} for a in artifacts]
    return write_json(out_dir / "manifest.json", {
        "tool": "insulate", "version": version, "seed": seed,
        "wall_time_s": wall_time, "config": config, "artifacts": entries,
    })

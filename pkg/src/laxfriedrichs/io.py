"""CSV/JSON/npz writers. Floats are written with 17 significant digits so reruns are byte-identical."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .grid import GridField, StaggeredGrid
from .scheme import Trajectory


def fmt(value) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    return f"{value:.17g}"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
    return path


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return path


def write_field_csv(path, field: GridField) -> Path:
    return write_rows(path, ["m", "x_m", "value"], zip(field.columns.tolist(), field.x, field.values))


def read_field_csv(path, grid: StaggeredGrid, parity: int, k: int) -> GridField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    f = GridField(grid, parity, k, np.zeros(grid.N))
    cols = data[:, 0].astype(int)
    f.values[(cols - f.offset) // 2] = data[:, 2]
    return f


def write_trajectory(out_dir, traj: Trajectory, prefix: str = "field") -> list[Path]:
    """One CSV per stored snapshot plus the diagnostics sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_field_csv(out_dir / f"{prefix}_k{f.k:06d}.csv", f) for f in traj.snapshots]
    paths.append(write_json(out_dir / "diagnostics.json", traj.diagnostics()))
    return paths


def save_field(path, field: GridField) -> Path:
    """Compact binary dump for resumable runs."""
    path = Path(path)
    np.savez(path, N=field.grid.N, K=field.grid.K, parity=field.parity, k=field.k, values=field.values)
    return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")


def load_field(path) -> GridField:
    with np.load(path) as z:
        grid = StaggeredGrid(int(z["N"]), int(z["K"]))
        return GridField(grid, int(z["parity"]), int(z["k"]), z["values"].copy())

"""On-disk formats: field snapshots, invariant time series, JSON helpers.

A snapshot is two files sharing a stem: ``stem.json`` (header) and
``stem.bin`` (little-endian complex128, u block then v block, row-major xyz).
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from nls2.functionals import InvariantReport
from nls2.grid import SystemState, make_grid

SNAPSHOT_DTYPE = "<c16"


def _stem(path) -> Path:
    p = Path(path)
    return p.with_suffix("") if p.suffix in (".json", ".bin", ".snapshot") else p


def write_snapshot(state: SystemState, path) -> Path:
    """Write ``state``; returns the header path."""
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "n_per_axis": state.grid.n_per_axis,
        "box_length": state.grid.box_length,
        "time": state.time,
        "beta": state.beta,
        "dtype": "complex128",
        "order": "row-major xyz",
        "fields": ["u", "v"],
        "data_file": stem.name + ".bin",
    }
    data = np.concatenate([state.u.ravel(), state.v.ravel()]).astype(SNAPSHOT_DTYPE)
    stem.with_suffix(".bin").write_bytes(data.tobytes())
    head = stem.with_suffix(".json")
    head.write_text(json.dumps(header, indent=2) + "\n")
    return head


def read_snapshot(path) -> SystemState:
    stem = _stem(path)
    header = json.loads(stem.with_suffix(".json").read_text())
    if header.get("dtype") != "complex128" or header.get("fields") != ["u", "v"]:
        raise ValueError(f"unsupported snapshot header in {stem}.json")
    grid = make_grid(header["n_per_axis"], header["box_length"])
    data_file = stem.parent / header.get("data_file", stem.name + ".bin")
    raw = np.frombuffer(data_file.read_bytes(), dtype=SNAPSHOT_DTYPE)
    npts = grid.n_per_axis**3
    if raw.size != 2 * npts:
        raise ValueError(f"{data_file} holds {raw.size} values, expected {2 * npts}")
    u = raw[:npts].reshape(grid.shape).astype(np.complex128)
    v = raw[npts:].reshape(grid.shape).astype(np.complex128)
    return SystemState(u, v, grid, float(header["time"]), float(header["beta"]))


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(InvariantReport.CSV_HEADER)
        for r in reports:
            w.writerow([repr(float(x)) for x in r.csv_row()])


def read_reports_csv(path) -> list[InvariantReport]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != InvariantReport.CSV_HEADER:
        raise ValueError(f"unexpected header in {path}")
    return [InvariantReport.from_csv_row(r) for r in rows[1:]]


def write_rows_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])


def read_rows_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())

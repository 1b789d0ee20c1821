"""File formats: measurement records (JSON or CSV + sidecar), coefficients, dense grids."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .padua import ChebCoeffs, DenseGrid, MeasurementRecord, PhaseGrid, equidistant_grid, padua_points

META_SUFFIX = ".meta.json"


def _grid_from_header(header: dict, points) -> PhaseGrid:
    kind = header.get("kind")
    L = float(header["L"])
    if kind == "padua":
        ref = padua_points(int(header["n"]), L)
    elif kind == "equidistant":
        ref = equidistant_grid(int(header["rows"]), int(header["cols"]), L)
    elif kind == "custom":
        return PhaseGrid("custom", L, points)
    else:
        raise ValueError(f"unknown grid kind {kind!r}")
    if points is None:
        return ref
    # keep the file's point order; the Padua interpolator re-identifies the nodes
    return PhaseGrid(kind, L, points, n=ref.n, rows=ref.rows, cols=ref.cols)


def record_to_dict(record: MeasurementRecord) -> dict:
    d = {
        "grid": record.grid.describe(),
        "function": record.function_tag,
        "noise_sigma": record.noise_sigma,
        "points": record.grid.points.tolist(),
        "values": record.values.tolist(),
    }
    if record.nonzero_count is not None:
        d["nonzero_count"] = record.nonzero_count
    return d


def record_from_dict(d: dict) -> MeasurementRecord:
    points = np.asarray(d["points"], dtype=float) if "points" in d else None
    grid = _grid_from_header(d["grid"], points)
    return MeasurementRecord(
        grid,
        d["values"],
        noise_sigma=float(d.get("noise_sigma", 0.0)),
        function_tag=d.get("function", "husimi_q"),
        nonzero_count=d.get("nonzero_count"),
    )


def write_record(record: MeasurementRecord, path) -> None:
    """JSON when ``path`` ends in ``.json``; otherwise CSV ``x,y,value`` plus a ``.meta.json`` sidecar."""
    path = Path(path)
    d = record_to_dict(record)
    if path.suffix == ".json":
        path.write_text(json.dumps(d, indent=1) + "\n")
        return
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "value"])
    for (x, y), v in zip(d["points"], d["values"]):
        w.writerow([repr(x), repr(y), repr(v)])
    path.write_text(buf.getvalue())
    meta = {k: v for k, v in d.items() if k not in ("points", "values")}
    Path(str(path) + META_SUFFIX).write_text(json.dumps(meta, indent=1) + "\n")


def read_record(path) -> MeasurementRecord:
    path = Path(path)
    if path.suffix == ".json":
        return record_from_dict(json.loads(path.read_text()))
    meta = json.loads(Path(str(path) + META_SUFFIX).read_text())
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    meta["points"] = [[float(r["x"]), float(r["y"])] for r in rows]
    meta["values"] = [float(r["value"]) for r in rows]
    return record_from_dict(meta)


def coeffs_to_dict(coeffs: ChebCoeffs) -> dict:
    return {"order": coeffs.order, "L": coeffs.L, "basis": "T_a(x/L) T_b(y/L)", "coeffs": coeffs.coeffs.tolist()}


def coeffs_from_dict(d: dict) -> ChebCoeffs:
    return ChebCoeffs(int(d["order"]), float(d["L"]), np.asarray(d["coeffs"], dtype=float))


def dense_grid_csv(grid: DenseGrid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "value"])
    for x, y, v in grid.rows():
        w.writerow([repr(x), repr(y), repr(v)])
    return buf.getvalue()

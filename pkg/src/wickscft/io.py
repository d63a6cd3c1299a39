"""CSV / JSON export of sampled fields and small tabular logs."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid import ComplexField, Grid1D, RealField

FORMATS = ("csv", "json")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _check_path(path) -> Path:
    if path is None or str(path) == "":
        raise OSError(f"cannot write field: empty path {str(path)!r}")
    return Path(path)


def export_field(f: RealField | ComplexField, path, format: str = "csv") -> Path:
    path = _check_path(path)
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    r = f.grid.r
    is_complex = isinstance(f, ComplexField)
    if format == "csv":
        lines = ["r,re,im" if is_complex else "r,value"]
        if is_complex:
            lines += [f"{_fmt(x)},{_fmt(v.real)},{_fmt(v.imag)}" for x, v in zip(r, f.values)]
        else:
            lines += [f"{_fmt(x)},{_fmt(v)}" for x, v in zip(r, f.values)]
        text = "\n".join(lines) + "\n"
    else:
        doc = {
            "grid": {"n_points": f.grid.n_points, "length": f.grid.length},
            "kind": "complex" if is_complex else "real",
            "r": r.tolist(),
        }
        if is_complex:
            doc["re"] = f.values.real.tolist()
            doc["im"] = f.values.imag.tolist()
        else:
            doc["values"] = f.values.tolist()
        text = json.dumps(doc, indent=1) + "\n"
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write field to {str(path)!r}: {exc.strerror or exc}") from exc
    return path


def import_field(path, grid: Grid1D | None = None) -> RealField | ComplexField:
    """Read a field written by :func:`export_field`.

    CSV files carry no box length, so it is inferred from the spacing of the
    ``r`` column unless ``grid`` is given.
    """
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text())
        grid = grid or Grid1D(doc["grid"]["n_points"], doc["grid"]["length"])
        if doc["kind"] == "complex":
            return ComplexField(grid, np.array(doc["re"]) + 1j * np.array(doc["im"]))
        return RealField(grid, np.array(doc["values"]))
    with path.open() as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array([[float(x) for x in row] for row in rows])
    if grid is None:
        n = len(rows)
        spacing = data[1, 0] - data[0, 0] if n > 1 else 1.0
        grid = Grid1D(n, spacing * n)
    if header == ["r", "re", "im"]:
        values = np.empty(len(rows), dtype=complex)
        values.real = data[:, 1]
        values.imag = data[:, 2]
        return ComplexField(grid, values)
    if header == ["r", "value"]:
        return RealField(grid, data[:, 1])
    raise ValueError(f"{path}: unrecognised header {header}")


def write_table(path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    """Plain CSV table; floats at full precision, ints and strings verbatim."""
    path = _check_path(path)
    out = [",".join(header)]
    for row in rows:
        out.append(",".join(_fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in row))
    path.write_text("\n".join(out) + "\n")
    return path


def write_json_atomic(path, doc) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return path

"""Field files: CSV with one row per vertex, and legacy-VTK ASCII export."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from elastinv.mesh import TriMesh


class FieldFormatError(ValueError):
    pass


def _fmt(v: float) -> str:
    return repr(float(v))


def write_field(path, mesh: TriMesh, columns: dict[str, np.ndarray]) -> Path:
    """Write nodal fields as ``x,y,<name>...`` rows; floats use round-trip ``repr``."""
    if mesh.num_vertices == 0:
        raise FieldFormatError("refusing to write a field on an empty mesh")
    path = Path(path)
    names = list(columns)
    cols = [np.asarray(columns[n], dtype=float) for n in names]
    for n, c in zip(names, cols):
        if c.shape != (mesh.num_vertices,):
            raise FieldFormatError(f"column {n!r} has shape {c.shape}, expected ({mesh.num_vertices},)")
    lines = [",".join(["x", "y", *names])]
    for i, (x, y) in enumerate(mesh.vertices):
        lines.append(",".join([_fmt(x), _fmt(y), *(_fmt(c[i]) for c in cols)]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_field(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Read a CSV field file; returns vertex coordinates and named columns."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FieldFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[:2] != ["x", "y"]:
        raise FieldFormatError(f"{path}:1: header must start with x,y and name at least one field")
    data = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise FieldFormatError(f"{path}:{lineno}: expected {len(header)} values, got {len(row)}")
        try:
            data.append([float(v) for v in row])
        except ValueError as exc:
            raise FieldFormatError(f"{path}:{lineno}: {exc}") from None
    if not data:
        raise FieldFormatError(f"{path}: no vertex rows")
    arr = np.array(data)
    return arr[:, :2], {name: arr[:, j + 2] for j, name in enumerate(header[2:])}


def read_vertex_field(path, mesh: TriMesh, names) -> np.ndarray:
    """Read named columns checked against ``mesh``'s vertex coordinates."""
    xy, cols = read_field(path)
    if xy.shape != mesh.vertices.shape or not np.allclose(xy, mesh.vertices, atol=1e-12):
        raise FieldFormatError(f"{path}: vertex coordinates do not match the mesh")
    missing = [n for n in names if n not in cols]
    if missing:
        raise FieldFormatError(f"{path}: missing columns {missing}")
    out = np.column_stack([cols[n] for n in names])
    return out[:, 0] if len(names) == 1 else out


def write_vtk(path, mesh: TriMesh, scalars: dict | None = None, vectors: dict | None = None,
              title: str = "elastinv field") -> Path:
    """Legacy-VTK ASCII unstructured grid with point data."""
    path = Path(path)
    nv, nt = mesh.num_vertices, mesh.num_triangles
    out = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
           f"POINTS {nv} double"]
    out += [f"{_fmt(x)} {_fmt(y)} 0.0" for x, y in mesh.vertices]
    out.append(f"CELLS {nt} {4 * nt}")
    out += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    out.append(f"CELL_TYPES {nt}")
    out += ["5"] * nt
    if scalars or vectors:
        out.append(f"POINT_DATA {nv}")
    for name, vals in (scalars or {}).items():
        vals = np.asarray(vals, dtype=float)
        out += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        out += [_fmt(v) for v in vals]
    for name, vals in (vectors or {}).items():
        vals = np.asarray(vals, dtype=float)
        out.append(f"VECTORS {name} double")
        out += [f"{_fmt(a)} {_fmt(b)} 0.0" for a, b in vals]
    path.write_text("\n".join(out) + "\n")
    return path

"""CSV and legacy-VTK output, deterministic byte-for-byte."""

from __future__ import annotations

import os

import numpy as np

from .mesh import Mesh, vtk_cell_type


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_field_csv(path: str, mesh: Mesh, u: np.ndarray) -> None:
    """Rows: cell id, centroid coordinates, cell-average value."""
    cols = "xyz"[: mesh.dim]
    lines = ["cell," + ",".join(cols) + ",value"]
    for c in range(mesh.ncells):
        coords = ",".join(_fmt(x) for x in mesh.centroid[c])
        lines.append(f"{c},{coords},{_fmt(u[c])}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def read_field_csv(path: str) -> np.ndarray:
    with open(path, encoding="utf-8") as f:
        header = f.readline()
        vals = [float(line.rsplit(",", 1)[1]) for line in f if line.strip()]
    return np.asarray(vals)


def write_vtk(path: str, mesh: Mesh, u: np.ndarray, title: str = "iqr field") -> None:
    """Legacy ASCII unstructured-grid dump with one scalar per cell."""
    pts = mesh.nodes
    if mesh.dim < 3:
        pts = np.hstack([pts, np.zeros((len(pts), 3 - mesh.dim))])
    k = mesh.conn.shape[1]
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(pts)} double",
    ]
    for p in pts:
        lines.append(" ".join(_fmt(x) for x in p))
    lines.append(f"CELLS {mesh.ncells} {mesh.ncells * (k + 1)}")
    for c in range(mesh.ncells):
        lines.append(f"{k} " + " ".join(str(int(v)) for v in mesh.conn[c]))
    lines.append(f"CELL_TYPES {mesh.ncells}")
    ct = vtk_cell_type(mesh.kind)
    lines.extend([str(ct)] * mesh.ncells)
    lines.append(f"CELL_DATA {mesh.ncells}")
    lines.append("SCALARS u double 1")
    lines.append("LOOKUP_TABLE default")
    for c in range(mesh.ncells):
        lines.append(_fmt(u[c]))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def validate_vtk(path: str) -> None:
    """Structural self-check: counts consistent, connectivity in range."""
    with open(path, encoding="utf-8") as f:
        lines = [ln.rstrip("\n") for ln in f]
    assert lines[0].startswith("# vtk DataFile")
    i = lines.index(next(ln for ln in lines if ln.startswith("POINTS")))
    npts = int(lines[i].split()[1])
    j = i + 1 + npts
    assert lines[j].startswith("CELLS"), lines[j]
    ncells, total = int(lines[j].split()[1]), int(lines[j].split()[2])
    size = 0
    for c in range(ncells):
        row = [int(v) for v in lines[j + 1 + c].split()]
        assert row[0] == len(row) - 1
        assert all(0 <= v < npts for v in row[1:])
        size += len(row)
    assert size == total
    jt = j + 1 + ncells
    assert lines[jt].startswith("CELL_TYPES")
    assert int(lines[jt].split()[1]) == ncells
    jd = jt + 1 + ncells
    assert lines[jd].startswith("CELL_DATA")
    assert int(lines[jd].split()[1]) == ncells
    values = lines[jd + 3 : jd + 3 + ncells]
    assert len(values) == ncells
    for v in values:
        float(v)


def write_convergence_csv(path: str, reports) -> None:
    lines = ["h,l1_error,l1_order,linf_error,linf_order"]
    for r in reports:
        l1o = "" if r.l1_order is None else _fmt(r.l1_order)
        lio = "" if r.linf_order is None else _fmt(r.linf_order)
        lines.append(f"{_fmt(r.h)},{_fmt(r.l1)},{l1o},{_fmt(r.linf)},{lio}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def ensure_dir(path: str) -> None:
    if path:
        os.makedirs(path, exist_ok=True)

"""Result writers: legacy ASCII VTK and CSV tables.

CSV files use the standard library writer (RFC 4180 quoting) with fixed
``%.10e`` formatting so repeated runs are byte-identical.
"""

import csv
import os

import numpy as np

from .errors import DomainError

VTK_CELL_TYPES = {"hex8": 12, "tet4": 10, "tet10": 24}

PROBE_COLUMNS = ("step", "load_factor", "probe", "ux", "uy", "uz", "p")


def _fmt(x):
    return f"{x:.10e}"


def write_vtk(mesh, path, point_vectors=None, point_scalars=None, cell_scalars=None, title="mixfem"):
    """Legacy ASCII unstructured grid.

    ``point_vectors`` and ``point_scalars`` map names to arrays of shape
    ``(n_nodes, 3)`` and ``(n_nodes,)``; ``cell_scalars`` to ``(n_cells,)``.
    Ten-node tetrahedra use the quadratic-tetra cell type, whose edge-node
    order matches the mesh convention.
    """
    point_vectors = dict(point_vectors or {})
    point_scalars = dict(point_scalars or {})
    cell_scalars = dict(cell_scalars or {})
    n, m = mesh.n_nodes, mesh.n_cells
    for name, v in point_vectors.items():
        if np.shape(v) != (n, 3):
            raise DomainError(f"point vector {name!r} has shape {np.shape(v)}, expected {(n, 3)}")
    for name, v in point_scalars.items():
        if np.shape(v) != (n,):
            raise DomainError(f"point scalar {name!r} has shape {np.shape(v)}, expected {(n,)}")
    for name, v in cell_scalars.items():
        if np.shape(v) != (m,):
            raise DomainError(f"cell scalar {name!r} has shape {np.shape(v)}, expected {(m,)}")
    ctype = VTK_CELL_TYPES[mesh.cell_type]
    k = mesh.cells.shape[1]
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {n} double"]
    lines += [" ".join(_fmt(c) for c in x) for x in mesh.nodes]
    lines.append(f"CELLS {m} {m * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"CELL_TYPES {m}")
    lines += [str(ctype)] * m
    if point_vectors or point_scalars:
        lines.append(f"POINT_DATA {n}")
        for name, v in point_vectors.items():
            lines.append(f"VECTORS {name} double")
            lines += [" ".join(_fmt(c) for c in row) for row in np.asarray(v, dtype=float)]
        for name, v in point_scalars.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(x) for x in np.asarray(v, dtype=float)]
    if cell_scalars:
        lines.append(f"CELL_DATA {m}")
        for name, v in cell_scalars.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [_fmt(x) for x in np.asarray(v, dtype=float)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_fields(path):
    """Parse the data sections written by :func:`write_vtk`.

    Returns ``{"points": array, "point": {name: array}, "cell": {name: array}}``;
    meant for checks on our own output, not as a general VTK reader.
    """
    with open(path) as fh:
        tok = fh.read().split("\n")
    out = {"points": None, "point": {}, "cell": {}}
    i, where, count = 0, None, 0
    while i < len(tok):
        words = tok[i].split()
        if not words:
            i += 1
            continue
        head = words[0]
        if head == "POINTS":
            count = int(words[1])
            out["points"] = np.array([[float(v) for v in tok[i + 1 + j].split()] for j in range(count)])
            i += count + 1
        elif head in ("POINT_DATA", "CELL_DATA"):
            where = "point" if head == "POINT_DATA" else "cell"
            count = int(words[1])
            i += 1
        elif head == "VECTORS":
            out[where][words[1]] = np.array([[float(v) for v in tok[i + 1 + j].split()] for j in range(count)])
            i += count + 1
        elif head == "SCALARS":
            out[where][words[1]] = np.array([float(tok[i + 2 + j]) for j in range(count)])
            i += count + 2
        else:
            i += 1
    return out


def write_probe_csv(path, rows):
    """Rows of ``(step, load_factor, probe name, ux, uy, uz, p)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROBE_COLUMNS)
        for step, lam, name, ux, uy, uz, p in rows:
            w.writerow([int(step), _fmt(lam), name, _fmt(ux), _fmt(uy), _fmt(uz), _fmt(p)])


def read_probe_csv(path):
    """Inverse of :func:`write_probe_csv`: ``{probe name: {column: array}}``."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for r in rows:
        d = out.setdefault(r["probe"], {c: [] for c in PROBE_COLUMNS if c != "probe"})
        for c in d:
            d[c].append(int(r[c]) if c == "step" else float(r[c]))
    return {k: {c: np.asarray(v) for c, v in d.items()} for k, d in out.items()}


def ensure_directory(path):
    os.makedirs(path, exist_ok=True)
    return path

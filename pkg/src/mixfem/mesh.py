"""Meshes: structured block generation, hex-to-tet conversion and the ASCII
mesh format.

File format (``#`` starts a comment, blank lines ignored)::

    NODES <n>
    <x> <y> <z>                      (n lines)
    CELLS <m>
    <type> <i0> <i1> ...             (m lines; type hex8, tet4 or tet10)
    SETS <k>
    SET <name> nodes <count>
    <i> <i> ...                      (node indices, any number per line)
    SET <name> faces <count>
    <facetype> <i0> <i1> ...         (count lines; quad4, tri3 or tri6)

Indices are zero-based.  Coordinates are written with 17 significant digits
so a write/read round trip is exact.
"""

from dataclasses import dataclass, field

import numpy as np

from .elements import (
    CELL_TYPE_SHAPE,
    HEX8_FACES,
    TET4_FACES,
    TET_EDGES,
    BasisFamily,
    evaluate,
    map_jacobian,
    quadrature_rule,
)
from .errors import DomainError, MeshFormatError, UnknownSetError
from .kinematics import det3

CELL_NODES = {"hex8": 8, "tet4": 4, "tet10": 10}
FACE_NODES = {"quad4": 4, "tri3": 3, "tri6": 6}
FACE_OF_CELL = {"hex8": "quad4", "tet4": "tri3", "tet10": "tri6"}
VERTEX_COUNT = {"hex8": 8, "tet4": 4, "tet10": 4}


@dataclass
class Mesh:
    nodes: np.ndarray
    cell_type: str
    cells: np.ndarray
    node_sets: dict = field(default_factory=dict)
    face_sets: dict = field(default_factory=dict)  # name -> (face type, (nf, k) array)

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_cells(self):
        return len(self.cells)

    @property
    def set_names(self):
        return sorted(set(self.node_sets) | set(self.face_sets))

    def set_nodes(self, name):
        """Nodes of a named set; face sets contribute all their face nodes."""
        if name in self.node_sets:
            return np.asarray(self.node_sets[name], dtype=int)
        if name in self.face_sets:
            return np.unique(self.face_sets[name][1])
        raise UnknownSetError(f"unknown boundary set {name!r}; available: {self.set_names}")

    def vertex_nodes(self):
        """Sorted indices of nodes that are cell vertices."""
        return np.unique(self.cells[:, : VERTEX_COUNT[self.cell_type]])

    def find_node(self, point, tol=1e-9):
        d = np.linalg.norm(self.nodes - np.asarray(point, dtype=float), axis=1)
        i = int(np.argmin(d))
        if d[i] > tol * max(1.0, float(np.abs(self.nodes).max())):
            raise DomainError(f"no mesh node at {list(point)} (closest is {d[i]:.3g} away)")
        return i

    def validate(self):
        """Check index bounds and positive reference Jacobians."""
        n = self.n_nodes
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= n):
            raise MeshFormatError("cell node index out of range")
        for name, (ftype, faces) in self.face_sets.items():
            if faces.size and (faces.min() < 0 or faces.max() >= n):
                raise MeshFormatError(f"face set {name!r} references a missing node")
        for name, ids in self.node_sets.items():
            ids = np.asarray(ids)
            if ids.size and (ids.min() < 0 or ids.max() >= n):
                raise MeshFormatError(f"node set {name!r} references a missing node")
        dets = self.reference_jacobians()
        if np.any(dets <= 0.0):
            e = int(np.argmin(dets.min(axis=1)))
            raise MeshFormatError(f"cell {e} has a non-positive reference Jacobian")
        return self

    def reference_jacobians(self, degree=None):
        shape = CELL_TYPE_SHAPE[self.cell_type]
        order = "quadratic" if self.cell_type == "tet10" else "linear"
        if degree is None:
            degree = 3 if shape == "hexahedron" else 4
        rule = quadrature_rule(shape, degree)
        _, dN = evaluate(BasisFamily(shape, "displacement", order), rule.points)
        return det3(map_jacobian(self.nodes[self.cells], dN))

    def volume(self):
        shape = CELL_TYPE_SHAPE[self.cell_type]
        degree = 3 if shape == "hexahedron" else 4
        rule = quadrature_rule(shape, degree)
        return float((self.reference_jacobians(degree) * rule.weights).sum())


def generate_block_mesh(nx, ny, nz, dimensions=(1.0, 1.0, 1.0), patch=None, origin=(0.0, 0.0, 0.0)):
    """Structured hex8 mesh of a box.

    Node and face sets ``xmin``..``zmax`` are always created.  ``patch``
    ``(px, py)`` adds a face set ``patch`` with the ``zmax`` faces whose
    centroids lie in ``[x0, x0 + px] x [y0, y0 + py]``.
    """
    nx, ny, nz = int(nx), int(ny), int(nz)
    if min(nx, ny, nz) < 1:
        raise DomainError("subdivision counts must be >= 1")
    lx, ly, lz = (float(d) for d in dimensions)
    if min(lx, ly, lz) <= 0.0:
        raise DomainError(f"degenerate block dimensions {dimensions}")
    x0, y0, z0 = origin
    xs = x0 + np.linspace(0.0, lx, nx + 1)
    ys = y0 + np.linspace(0.0, ly, ny + 1)
    zs = z0 + np.linspace(0.0, lz, nz + 1)
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def nid(i, j, k):
        return (i * (ny + 1) + j) * (nz + 1) + k

    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    cells = np.column_stack([
        nid(i, j, k), nid(i + 1, j, k), nid(i + 1, j + 1, k), nid(i, j + 1, k),
        nid(i, j, k + 1), nid(i + 1, j, k + 1), nid(i + 1, j + 1, k + 1), nid(i, j + 1, k + 1),
    ])
    mesh = Mesh(nodes=nodes, cell_type="hex8", cells=cells)
    tol = 1e-12 * max(lx, ly, lz)
    bounds = {
        "xmin": (0, xs[0]), "xmax": (0, xs[-1]),
        "ymin": (1, ys[0]), "ymax": (1, ys[-1]),
        "zmin": (2, zs[0]), "zmax": (2, zs[-1]),
    }
    faces = boundary_faces(mesh)
    centroids = nodes[faces].mean(axis=1)
    for name, (axis, value) in bounds.items():
        mesh.node_sets[name] = np.flatnonzero(np.abs(nodes[:, axis] - value) <= tol)
        on = np.all(np.abs(nodes[faces][:, :, axis] - value) <= tol, axis=1)
        mesh.face_sets[name] = ("quad4", faces[on])
    if patch is not None:
        px, py = patch
        top = mesh.face_sets["zmax"][1]
        c = nodes[top].mean(axis=1)
        inside = (c[:, 0] <= x0 + px + tol) & (c[:, 1] <= y0 + py + tol)
        mesh.face_sets["patch"] = ("quad4", top[inside])
    del centroids
    return mesh


def boundary_faces(mesh):
    """Faces (outward node order) that belong to exactly one cell."""
    local = HEX8_FACES if mesh.cell_type == "hex8" else TET4_FACES
    allf = mesh.cells[:, np.array(local)].reshape(-1, len(local[0]))
    key = np.sort(allf, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = np.asarray(inv).ravel()
    faces = allf[counts[inv] == 1]
    if mesh.cell_type == "tet10":
        faces = _add_face_midnodes(mesh, faces)
    return faces


# Kuhn subdivision: six tetrahedra around the 0-6 diagonal; conforming on
# structured grids because every cell uses the same diagonal orientation.
_KUHN = ((0, 1, 2, 6), (0, 2, 3, 6), (0, 3, 7, 6), (0, 7, 4, 6), (0, 4, 5, 6), (0, 5, 1, 6))


def _edge_table(cells4):
    edges = np.sort(cells4[:, np.array(TET_EDGES)].reshape(-1, 2), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    return uniq, np.asarray(inv).ravel().reshape(len(cells4), 6)


def hex_to_tet(mesh, quadratic=True):
    """Split every hex8 into six tetrahedra (tet10 when ``quadratic``)."""
    if mesh.cell_type != "hex8":
        raise DomainError("hex_to_tet expects a hex8 mesh")
    tets = mesh.cells[:, np.array(_KUHN)].reshape(-1, 4)
    nodes = mesh.nodes
    # make orientation positive
    x = nodes[tets]
    vol = np.einsum("ij,ij->i", np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0]), x[:, 3] - x[:, 0])
    flip = vol < 0.0
    tets[flip] = tets[flip][:, [0, 2, 1, 3]]
    cell_type = "tet4"
    if quadratic:
        uniq, inv = _edge_table(tets)
        mid = 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])
        tets = np.hstack([tets, mesh.n_nodes + inv])
        nodes = np.vstack([nodes, mid])
        cell_type = "tet10"
    out = Mesh(nodes=nodes, cell_type=cell_type, cells=tets)
    faces = boundary_faces(out)
    # assign boundary triangles to the quad face sets that contain them
    lookup = {}
    for name, (_, quads) in mesh.face_sets.items():
        for q in quads:
            qs = set(int(v) for v in q)
            for drop in range(4):
                tri = tuple(sorted(qs - {int(q[drop])}))
                lookup.setdefault(tri, []).append(name)
    members = {name: [] for name in mesh.face_sets}
    for f in faces:
        for name in lookup.get(tuple(sorted(int(v) for v in f[:3])), ()):
            members[name].append(f)
    ftype = FACE_OF_CELL[cell_type]
    width = FACE_NODES[ftype]
    for name, fl in members.items():
        out.face_sets[name] = (ftype, np.array(fl, dtype=int).reshape(-1, width))
    for name in mesh.node_sets:
        if name in out.face_sets:
            out.node_sets[name] = np.unique(out.face_sets[name][1])
    return out


def _add_face_midnodes(mesh, faces):
    uniq, inv = _edge_table(mesh.cells[:, :4])
    edge_node = {}
    for c in range(mesh.n_cells):
        for m, (a, b) in enumerate(TET_EDGES):
            key = tuple(sorted((int(mesh.cells[c, a]), int(mesh.cells[c, b]))))
            edge_node[key] = int(mesh.cells[c, 4 + m])
    out = np.empty((len(faces), 6), dtype=int)
    out[:, :3] = faces
    for r, f in enumerate(faces):
        for m, (a, b) in enumerate(((0, 1), (1, 2), (2, 0))):
            out[r, 3 + m] = edge_node[tuple(sorted((int(f[a]), int(f[b]))))]
    return out


# --- ASCII format -------------------------------------------------------------

def write_mesh(mesh, path):
    lines = [f"NODES {mesh.n_nodes}"]
    lines += ["{:.17g} {:.17g} {:.17g}".format(*x) for x in mesh.nodes]
    lines.append(f"CELLS {mesh.n_cells}")
    lines += [mesh.cell_type + " " + " ".join(str(int(v)) for v in c) for c in mesh.cells]
    names = sorted(mesh.node_sets) + sorted(mesh.face_sets)
    lines.append(f"SETS {len(names)}")
    for name in sorted(mesh.node_sets):
        ids = np.asarray(mesh.node_sets[name], dtype=int)
        lines.append(f"SET {name} nodes {len(ids)}")
        for start in range(0, len(ids), 16):
            lines.append(" ".join(str(int(v)) for v in ids[start:start + 16]))
    for name in sorted(mesh.face_sets):
        ftype, faces = mesh.face_sets[name]
        lines.append(f"SET {name} faces {len(faces)}")
        lines += [ftype + " " + " ".join(str(int(v)) for v in f) for f in faces]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


class _Lines:
    def __init__(self, path):
        self.path = path
        try:
            with open(path) as fh:
                raw = fh.read().splitlines()
        except OSError as exc:
            raise MeshFormatError(f"cannot read mesh file ({exc.strerror})", path=path) from exc
        self.items = []
        for no, text in enumerate(raw, start=1):
            text = text.split("#", 1)[0].strip()
            if text:
                self.items.append((no, text.split()))
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise MeshFormatError(f"unexpected end of file while reading {what}", line=last, path=self.path)
        item = self.items[self.pos]
        self.pos += 1
        return item

    def error(self, msg, line):
        return MeshFormatError(msg, line=line, path=self.path)


def _header(lines, keyword):
    no, tok = lines.next(f"{keyword} header")
    if tok[0] != keyword or len(tok) != 2:
        raise lines.error(f"expected '{keyword} <count>', got {' '.join(tok)!r}", no)
    try:
        count = int(tok[1])
    except ValueError:
        raise lines.error(f"bad {keyword} count {tok[1]!r}", no) from None
    if count < 0:
        raise lines.error(f"negative {keyword} count", no)
    return count


def _ints(lines, tok, no, n_nodes):
    try:
        vals = [int(t) for t in tok]
    except ValueError:
        raise lines.error(f"non-integer node index in {' '.join(tok)!r}", no) from None
    for v in vals:
        if v < 0 or v >= n_nodes:
            raise lines.error(f"node index {v} out of range [0, {n_nodes})", no)
    return vals


def read_mesh(path):
    """Parse and validate a mesh file (strict; errors carry line numbers)."""
    lines = _Lines(path)
    n_nodes = _header(lines, "NODES")
    nodes = np.empty((n_nodes, 3))
    for r in range(n_nodes):
        no, tok = lines.next("node coordinates")
        if len(tok) != 3:
            raise lines.error(f"node line needs 3 coordinates, got {len(tok)}", no)
        try:
            nodes[r] = [float(t) for t in tok]
        except ValueError:
            raise lines.error(f"bad coordinate in {' '.join(tok)!r}", no) from None
    n_cells = _header(lines, "CELLS")
    cell_type = None
    cells = []
    cell_lines = []
    for _ in range(n_cells):
        no, tok = lines.next("cell")
        ctype = tok[0]
        if ctype not in CELL_NODES:
            raise lines.error(f"unknown cell type {ctype!r}", no)
        if cell_type is None:
            cell_type = ctype
        elif ctype != cell_type:
            raise lines.error(f"mixed cell types ({cell_type}, {ctype}) are not supported", no)
        if len(tok) - 1 != CELL_NODES[ctype]:
            raise lines.error(f"{ctype} needs {CELL_NODES[ctype]} node indices, got {len(tok) - 1}", no)
        cells.append(_ints(lines, tok[1:], no, n_nodes))
        cell_lines.append(no)
    mesh = Mesh(nodes=nodes, cell_type=cell_type or "hex8",
                cells=np.array(cells, dtype=int).reshape(n_cells, -1))
    if lines.pos < len(lines.items):
        n_sets = _header(lines, "SETS")
        for _ in range(n_sets):
            no, tok = lines.next("SET header")
            if tok[0] != "SET" or len(tok) != 4 or tok[2] not in ("nodes", "faces"):
                raise lines.error("expected 'SET <name> <nodes|faces> <count>'", no)
            name, kind = tok[1], tok[2]
            if name in (mesh.node_sets if kind == "nodes" else mesh.face_sets):
                raise lines.error(f"duplicate {kind} set {name!r}", no)
            try:
                count = int(tok[3])
            except ValueError:
                raise lines.error(f"bad set size {tok[3]!r}", no) from None
            if kind == "nodes":
                ids = []
                while len(ids) < count:
                    no2, tok2 = lines.next(f"node set {name}")
                    ids += _ints(lines, tok2, no2, n_nodes)
                if len(ids) != count:
                    raise lines.error(f"node set {name!r} has {len(ids)} entries, expected {count}", no2)
                mesh.node_sets[name] = np.array(ids, dtype=int)
            else:
                faces, ftype = [], None
                for _ in range(count):
                    no2, tok2 = lines.next(f"face set {name}")
                    if tok2[0] not in FACE_NODES:
                        raise lines.error(f"unknown face type {tok2[0]!r}", no2)
                    if ftype is not None and tok2[0] != ftype:
                        raise lines.error("mixed face types in one set", no2)
                    ftype = tok2[0]
                    if len(tok2) - 1 != FACE_NODES[ftype]:
                        raise lines.error(f"{ftype} needs {FACE_NODES[ftype]} indices", no2)
                    faces.append(_ints(lines, tok2[1:], no2, n_nodes))
                ftype = ftype or FACE_OF_CELL[mesh.cell_type]
                mesh.face_sets[name] = (ftype, np.array(faces, dtype=int).reshape(count, FACE_NODES[ftype]))
    if lines.pos < len(lines.items):
        no, tok = lines.items[lines.pos]
        raise lines.error(f"unexpected content {' '.join(tok)!r}", no)
    dets = mesh.reference_jacobians() if n_cells else np.ones((0, 1))
    if n_cells and np.any(dets <= 0.0):
        e = int(np.argmin(dets.min(axis=1)))
        raise lines.error(f"cell {e} is inverted (non-positive reference Jacobian)", cell_lines[e])
    return mesh

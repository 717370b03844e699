"""Builders for the two benchmark problems.

``bar``: a rectangular bar stretched along z with symmetry conditions on the
three coordinate planes, so the exact solution is homogeneous uniaxial
tension.  ``block``: a quarter of a block compressed by a dead pressure on a
patch of its top face, with the top face held laterally.
"""

import numpy as np

from .assembly import DirichletBC, LoadProgram, NeumannBC, Problem
from .elements import TET_EDGES, mixed_element
from .materials import Material
from .mesh import generate_block_mesh, hex_to_tet

BAR_DEFAULTS = dict(
    dimensions=(5.0, 5.0, 5.0), divisions=(6, 6, 30), stretch=20.0, n_steps=10,
    deviatoric="gent", E=100.0, Im=30.0, volumetric=1,
)
BLOCK_DEFAULTS = dict(
    dimensions=(1.0, 1.0, 1.0), n=4, patch=(0.5, 0.5), pressure=20.0, load_ratio=80.0,
    n_steps=4, deviatoric="neo_hookean", E=240.565, volumetric=8,
)


def structured_mesh(element, divisions, dimensions, patch=None):
    """Hex mesh for Q1/P0, or the six-tet split with midside nodes for P2 pairs."""
    mesh = generate_block_mesh(*divisions, dimensions=dimensions, patch=patch)
    if element.cell_type == "tet10":
        mesh = hex_to_tet(mesh, quadratic=True)
    elif element.cell_type == "tet4":
        mesh = hex_to_tet(mesh, quadratic=False)
    return mesh


def bar_problem(kind, nu, element="Q1/P0", basis_kind="lagrange", divisions=None,
                dimensions=None, stretch=None, deviatoric=None, E=None, Im=None,
                volumetric=None, condense=None, mesh=None):
    """Bar stretched by ``stretch`` along z; returns ``(problem, probe point)``.

    The probe is the corner opposite the origin, where lateral contraction and
    axial displacement are largest.
    """
    d = BAR_DEFAULTS
    el = mixed_element(element, basis_kind) if isinstance(element, str) else element
    dims = tuple(dimensions or d["dimensions"])
    if mesh is None:
        mesh = structured_mesh(el, divisions or d["divisions"], dims)
    mat = Material.from_parameters(
        deviatoric=deviatoric or d["deviatoric"], E=E or d["E"], nu=nu,
        Im=Im if Im is not None else d["Im"], volumetric=volumetric or d["volumetric"],
    )
    bcs = [
        DirichletBC("xmin", 0, 0.0), DirichletBC("ymin", 1, 0.0), DirichletBC("zmin", 2, 0.0),
        DirichletBC("zmax", 2, float(stretch if stretch is not None else d["stretch"])),
    ]
    pb = Problem(mesh=mesh, element=el, kind=kind, material=mat, dirichlet=bcs, condense=condense)
    return pb, dims


def block_problem(kind, nu, n=None, element="Q1/P0", basis_kind="lagrange", dimensions=None,
                  patch=None, pressure=None, load_ratio=None, deviatoric=None, E=None,
                  volumetric=None, condense=None, mesh=None):
    """Quarter block under a dead patch pressure; returns ``(problem, point A)``.

    Point A is the top-face corner on the symmetry axis (the loaded centre).
    """
    d = BLOCK_DEFAULTS
    el = mixed_element(element, basis_kind) if isinstance(element, str) else element
    dims = tuple(dimensions or d["dimensions"])
    n = n or d["n"]
    if mesh is None:
        mesh = structured_mesh(el, (n, n, n), dims, patch=tuple(patch or d["patch"]))
    mat = Material.from_parameters(
        deviatoric=deviatoric or d["deviatoric"], E=E or d["E"], nu=nu,
        volumetric=volumetric or d["volumetric"],
    )
    load = (pressure or d["pressure"]) * (load_ratio or d["load_ratio"])
    bcs = [
        DirichletBC("xmin", 0, 0.0), DirichletBC("ymin", 1, 0.0), DirichletBC("zmin", 2, 0.0),
        DirichletBC("zmax", 0, 0.0), DirichletBC("zmax", 1, 0.0),
    ]
    tr = [NeumannBC("patch", (0.0, 0.0, -float(load)))]
    pb = Problem(mesh=mesh, element=el, kind=kind, material=mat, dirichlet=bcs, neumann=tr,
                 condense=condense)
    return pb, (0.0, 0.0, dims[2])


def default_program(n_steps):
    return LoadProgram(int(n_steps))


def nodal_pressure(problem, dofs, state):
    """Pressure at every mesh node.

    Continuous pressures are taken from the vertex unknowns, with midside
    nodes of quadratic tetrahedra given the mean of their edge ends.
    Element-wise pressures are averaged over the elements sharing a node.
    """
    cells = problem.mesh.cells
    n = problem.mesh.n_nodes
    if dofs.p_nodes is None:
        counts = np.bincount(cells.ravel(), minlength=n)
        sums = np.bincount(cells.ravel(), weights=np.repeat(state.p, cells.shape[1]), minlength=n)
        out = np.zeros(n)
        used = counts > 0
        out[used] = sums[used] / counts[used]
        return out
    out = np.zeros(n)
    out[dofs.p_nodes] = state.p
    if cells.shape[1] == 10:
        for k, (a, b) in enumerate(TET_EDGES):
            out[cells[:, 4 + k]] = 0.5 * (out[cells[:, a]] + out[cells[:, b]])
    return out


def probe_values(problem, dofs, state, node):
    """Displacement and pressure at ``node`` (see :func:`nodal_pressure`)."""
    return state.u[node].copy(), float(nodal_pressure(problem, dofs, state)[node])

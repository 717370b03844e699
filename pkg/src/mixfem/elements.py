"""Reference-element bases and quadrature for the mixed discretisations.

Supported cells are the trilinear hexahedron (Q1) and linear/quadratic
tetrahedra (P1/P2, Lagrange or Bernstein).  Pressure and Jacobian fields use
either the constant (element-discontinuous) or the linear tetrahedral basis.

Node orderings follow VTK: ``VTK_HEXAHEDRON`` for hex8 and
``VTK_QUADRATIC_TETRA`` for tet10 (vertices, then edges 01, 12, 20, 03, 13,
23).
"""

from dataclasses import dataclass
from functools import lru_cache
from math import ceil

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .errors import CapabilityError, DomainError

CELL_SHAPES = ("hexahedron", "tetrahedron")
FIELD_ROLES = ("displacement", "pressure", "jacobian")
ORDERS = ("constant", "linear", "quadratic")
BASIS_KINDS = ("lagrange", "bernstein")

HEX8_REF_NODES = np.array(
    [
        [-1.0, -1.0, -1.0],
        [1.0, -1.0, -1.0],
        [1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [1.0, -1.0, 1.0],
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, 1.0],
    ]
)
TET_REF_VERTICES = np.array(
    [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)
TET_EDGES = ((0, 1), (1, 2), (2, 0), (0, 3), (1, 3), (2, 3))

# local faces, outward orientation; hex faces are quads, tet faces triangles
HEX8_FACES = ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7))
TET4_FACES = ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2))

REFERENCE_VOLUME = {"hexahedron": 8.0, "tetrahedron": 1.0 / 6.0}

_GRAD_BARY = np.array(
    [[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
)


@dataclass(frozen=True)
class BasisFamily:
    """A scalar basis on a reference cell."""

    cell_shape: str
    field_role: str = "displacement"
    order: str = "linear"
    basis_kind: str = "lagrange"

    def __post_init__(self):
        if self.cell_shape not in CELL_SHAPES:
            raise CapabilityError(f"unknown cell shape {self.cell_shape!r}")
        if self.field_role not in FIELD_ROLES:
            raise CapabilityError(f"unknown field role {self.field_role!r}")
        if self.order not in ORDERS:
            raise CapabilityError(f"unknown order {self.order!r}")
        if self.basis_kind not in BASIS_KINDS:
            raise CapabilityError(f"unknown basis kind {self.basis_kind!r}")
        if self.cell_shape == "hexahedron" and self.order == "quadratic":
            raise CapabilityError("quadratic hexahedra are not provided")

    @property
    def n_functions(self):
        if self.order == "constant":
            return 1
        if self.cell_shape == "hexahedron":
            return 8
        return 4 if self.order == "linear" else 10


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int = 0

    def __len__(self):
        return len(self.weights)


def _check_inside(cell_shape, pts, tol=1e-12):
    if cell_shape == "hexahedron":
        bad = np.any(np.abs(pts) > 1.0 + tol, axis=1)
    else:
        bad = np.any(pts < -tol, axis=1) | (pts.sum(axis=1) > 1.0 + tol)
    if np.any(bad):
        raise DomainError(
            f"reference point {pts[np.argmax(bad)].tolist()} lies outside the {cell_shape}"
        )


def _hex_trilinear(pts):
    s = HEX8_REF_NODES
    fx = 1.0 + pts[:, None, 0] * s[None, :, 0]
    fy = 1.0 + pts[:, None, 1] * s[None, :, 1]
    fz = 1.0 + pts[:, None, 2] * s[None, :, 2]
    values = 0.125 * fx * fy * fz
    grads = np.empty(values.shape + (3,))
    grads[..., 0] = 0.125 * s[None, :, 0] * fy * fz
    grads[..., 1] = 0.125 * s[None, :, 1] * fx * fz
    grads[..., 2] = 0.125 * s[None, :, 2] * fx * fy
    return values, grads


def _barycentric(pts):
    lam = np.empty((len(pts), 4))
    lam[:, 0] = 1.0 - pts.sum(axis=1)
    lam[:, 1:] = pts
    return lam


def _tet_quadratic(pts, bernstein):
    lam = _barycentric(pts)
    nq = len(pts)
    values = np.empty((nq, 10))
    grads = np.empty((nq, 10, 3))
    for i in range(4):
        if bernstein:
            values[:, i] = lam[:, i] ** 2
            grads[:, i] = 2.0 * lam[:, i, None] * _GRAD_BARY[i]
        else:
            values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * _GRAD_BARY[i]
    scale = 2.0 if bernstein else 4.0
    for m, (i, j) in enumerate(TET_EDGES):
        values[:, 4 + m] = scale * lam[:, i] * lam[:, j]
        grads[:, 4 + m] = scale * (
            lam[:, j, None] * _GRAD_BARY[i] + lam[:, i, None] * _GRAD_BARY[j]
        )
    return values, grads


def evaluate(family, points):
    """Values ``(nq, n)`` and reference gradients ``(nq, n, 3)`` at many points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _check_inside(family.cell_shape, pts)
    nq = len(pts)
    if family.order == "constant":
        return np.ones((nq, 1)), np.zeros((nq, 1, 3))
    if family.cell_shape == "hexahedron":
        return _hex_trilinear(pts)
    if family.order == "linear":
        grads = np.broadcast_to(_GRAD_BARY, (nq, 4, 3)).copy()
        return _barycentric(pts), grads
    return _tet_quadratic(pts, family.basis_kind == "bernstein")


def shape_eval(family, xi):
    """Basis values and reference gradients at a single reference point."""
    values, grads = evaluate(family, np.asarray(xi, dtype=float).reshape(1, 3))
    return values[0], grads[0]


def _gauss_legendre_01(n):
    x, w = roots_legendre(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _gauss_jacobi_01(n, alpha):
    # weight (1 - t)^alpha on [0, 1]
    x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (x + 1.0), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def _cached_rule(cell_shape, degree):
    if cell_shape == "hexahedron":
        if not 0 <= degree <= 5:
            raise CapabilityError(f"hexahedral quadrature supports degree <= 5, got {degree}")
        n = max(1, ceil((degree + 1) / 2))
        x, w = roots_legendre(n)
        gx, gy, gz = np.meshgrid(x, x, x, indexing="ij")
        wx, wy, wz = np.meshgrid(w, w, w, indexing="ij")
        # ordering with the last coordinate fastest varying
        pts = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])
        wts = (wx * wy * wz).ravel()
        return pts, wts
    if cell_shape != "tetrahedron":
        raise CapabilityError(f"unknown cell shape {cell_shape!r}")
    if not 0 <= degree <= 4:
        raise CapabilityError(f"tetrahedral quadrature supports degree <= 4, got {degree}")
    if degree <= 1:
        return np.full((1, 3), 0.25), np.array([1.0 / 6.0])
    if degree == 2:
        a, b = 0.5854101966249685, 0.1381966011250105
        pts = np.array([[b, b, b], [a, b, b], [b, a, b], [b, b, a]])
        return pts, np.full(4, 1.0 / 24.0)
    # collapsed-cube product rule, positive weights, exact to degree 2n - 1
    n = ceil((degree + 1) / 2)
    t1, w1 = _gauss_jacobi_01(n, 2.0)
    t2, w2 = _gauss_jacobi_01(n, 1.0)
    t3, w3 = _gauss_legendre_01(n)
    a, b, c = np.meshgrid(t1, t2, t3, indexing="ij")
    wa, wb, wc = np.meshgrid(w1, w2, w3, indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    pts = np.column_stack([a, b * (1.0 - a), c * (1.0 - a) * (1.0 - b)])
    return pts, (wa * wb * wc).ravel()


def quadrature_rule(cell_shape, degree):
    """Positive-weight rule integrating polynomials of total degree ``degree`` exactly."""
    degree = int(degree)
    pts, wts = _cached_rule(cell_shape, degree)
    return QuadratureRule(points=pts.copy(), weights=wts.copy(), degree=degree)


def map_jacobian(coords, ref_grads):
    """Isoparametric Jacobian ``dX/dxi``.

    ``coords`` has shape ``(..., n, 3)`` and ``ref_grads`` ``(nq, n, 3)``;
    the result has shape ``(..., nq, 3, 3)`` with ``[I, a] = dX_I/dxi_a``.
    """
    return np.einsum("...ni,qna->...qia", coords, ref_grads)


@dataclass(frozen=True)
class MixedElement:
    """A displacement/pressure(/jacobian) basis triple with its quadrature."""

    name: str
    cell_type: str
    displacement: BasisFamily
    pressure: BasisFamily
    jacobian: BasisFamily
    quadrature: QuadratureRule

    @property
    def cell_shape(self):
        return self.displacement.cell_shape

    @property
    def pressure_is_discontinuous(self):
        return self.pressure.order == "constant"


CELL_TYPE_SHAPE = {"hex8": "hexahedron", "tet4": "tetrahedron", "tet10": "tetrahedron"}

_PAIRS = {
    # name: (cell type, displacement order, pressure order, default quadrature degree)
    "Q1/P0": ("hex8", "linear", "constant", 3),
    "P2/P1": ("tet10", "quadratic", "linear", 4),
    "P2/P0": ("tet10", "quadratic", "constant", 4),
}
ELEMENT_ALIASES = {"hex8_p0": "Q1/P0", "tet10_p1": "P2/P1", "tet10_p0": "P2/P0"}


def mixed_element(name, basis_kind="lagrange", quadrature_degree=None):
    """Build a named element pair: ``"Q1/P0"``, ``"P2/P1"`` or ``"P2/P0"``."""
    key = ELEMENT_ALIASES.get(name, name)
    if key not in _PAIRS:
        raise CapabilityError(f"unknown element pair {name!r}; choose from {sorted(_PAIRS)}")
    cell_type, u_order, p_order, degree = _PAIRS[key]
    if quadrature_degree is not None:
        degree = quadrature_degree
    shape = CELL_TYPE_SHAPE[cell_type]
    if shape == "hexahedron" and basis_kind != "lagrange":
        raise CapabilityError("Bernstein bases are only provided on tetrahedra")
    return MixedElement(
        name=key,
        cell_type=cell_type,
        displacement=BasisFamily(shape, "displacement", u_order, basis_kind),
        pressure=BasisFamily(shape, "pressure", p_order, basis_kind),
        jacobian=BasisFamily(shape, "jacobian", "constant", basis_kind),
        quadrature=quadrature_rule(shape, degree),
    )


# --- boundary faces -------------------------------------------------------

FACE_TYPES = ("quad4", "tri3", "tri6")


def face_rule(face_type):
    """Quadrature on the reference face (quad [-1,1]^2, triangle unit simplex)."""
    if face_type == "quad4":
        g = 1.0 / np.sqrt(3.0)
        pts = np.array([[-g, -g], [g, -g], [g, g], [-g, g]])
        return pts, np.ones(4)
    if face_type in ("tri3", "tri6"):
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1.0 / 6.0)
    raise CapabilityError(f"unknown face type {face_type!r}")


def face_basis(face_type, points, basis_kind="lagrange"):
    """Face basis values ``(nq, n)`` and parametric gradients ``(nq, n, 2)``."""
    pts = np.atleast_2d(points)
    if face_type == "quad4":
        s = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)
        fx = 1.0 + pts[:, None, 0] * s[None, :, 0]
        fy = 1.0 + pts[:, None, 1] * s[None, :, 1]
        vals = 0.25 * fx * fy
        grads = np.stack([0.25 * s[None, :, 0] * fy, 0.25 * s[None, :, 1] * fx], axis=-1)
        return vals, grads
    lam = np.column_stack([1.0 - pts.sum(axis=1), pts[:, 0], pts[:, 1]])
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    nq = len(pts)
    if face_type == "tri3":
        return lam, np.broadcast_to(dlam, (nq, 3, 2)).copy()
    if face_type != "tri6":
        raise CapabilityError(f"unknown face type {face_type!r}")
    bern = basis_kind == "bernstein"
    vals = np.empty((nq, 6))
    grads = np.empty((nq, 6, 2))
    for i in range(3):
        if bern:
            vals[:, i] = lam[:, i] ** 2
            grads[:, i] = 2.0 * lam[:, i, None] * dlam[i]
        else:
            vals[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
            grads[:, i] = (4.0 * lam[:, i, None] - 1.0) * dlam[i]
    scale = 2.0 if bern else 4.0
    for m, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
        vals[:, 3 + m] = scale * lam[:, i] * lam[:, j]
        grads[:, 3 + m] = scale * (lam[:, j, None] * dlam[i] + lam[:, i, None] * dlam[j])
    return vals, grads

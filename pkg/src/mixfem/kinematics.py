"""Deformation measures and the gradient/divergence operator matrices.

Second-order tensors are stored as 9-vectors in column-major order, i.e.
``vec(A)[i + 3*j] = A[i, j]``.  For a displacement gradient this gives the
sequence u_{x,x}, u_{y,x}, u_{z,x}, u_{x,y}, ..., u_{z,z}.  The materials
module flattens the fourth-order elasticity tensor with the same convention.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvertedElementError


def vec9(a):
    """Column-major flattening of ``(..., 3, 3)`` to ``(..., 9)``."""
    a = np.asarray(a)
    return np.swapaxes(a, -1, -2).reshape(a.shape[:-2] + (9,))


def unvec9(v):
    """Inverse of :func:`vec9`."""
    v = np.asarray(v)
    return np.swapaxes(v.reshape(v.shape[:-1] + (3, 3)), -1, -2)


@dataclass(frozen=True)
class DeformationState:
    F: np.ndarray
    J: float
    Fbar: np.ndarray
    Cbar: np.ndarray
    I1bar: float


def deformation_gradient(grad_u_ref):
    """Deformation state from the material displacement gradient."""
    F = np.eye(3) + np.asarray(grad_u_ref, dtype=float)
    J = float(np.linalg.det(F))
    if not J > 0.0:
        raise InvertedElementError(J)
    Fbar = J ** (-1.0 / 3.0) * F
    Cbar = Fbar.T @ Fbar
    return DeformationState(F=F, J=J, Fbar=Fbar, Cbar=Cbar, I1bar=float(np.trace(Cbar)))


def det3(F):
    """Batched 3x3 determinant by cofactor expansion."""
    return (
        F[..., 0, 0] * (F[..., 1, 1] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 1])
        - F[..., 0, 1] * (F[..., 1, 0] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 0])
        + F[..., 0, 2] * (F[..., 1, 0] * F[..., 2, 1] - F[..., 1, 1] * F[..., 2, 0])
    )


def inv3(F, J=None):
    """Batched inverse of 3x3 matrices via the adjugate."""
    if J is None:
        J = det3(F)
    adj = np.empty_like(F)
    adj[..., 0, 0] = F[..., 1, 1] * F[..., 2, 2] - F[..., 1, 2] * F[..., 2, 1]
    adj[..., 0, 1] = F[..., 0, 2] * F[..., 2, 1] - F[..., 0, 1] * F[..., 2, 2]
    adj[..., 0, 2] = F[..., 0, 1] * F[..., 1, 2] - F[..., 0, 2] * F[..., 1, 1]
    adj[..., 1, 0] = F[..., 1, 2] * F[..., 2, 0] - F[..., 1, 0] * F[..., 2, 2]
    adj[..., 1, 1] = F[..., 0, 0] * F[..., 2, 2] - F[..., 0, 2] * F[..., 2, 0]
    adj[..., 1, 2] = F[..., 0, 2] * F[..., 1, 0] - F[..., 0, 0] * F[..., 1, 2]
    adj[..., 2, 0] = F[..., 1, 0] * F[..., 2, 1] - F[..., 1, 1] * F[..., 2, 0]
    adj[..., 2, 1] = F[..., 0, 1] * F[..., 2, 0] - F[..., 0, 0] * F[..., 2, 1]
    adj[..., 2, 2] = F[..., 0, 0] * F[..., 1, 1] - F[..., 0, 1] * F[..., 1, 0]
    return adj / J[..., None, None]


def check_positive(J, what="J"):
    """Raise :class:`InvertedElementError` at the worst non-positive entry.

    ``J`` is indexed ``(element, point)`` when two-dimensional.
    """
    J = np.asarray(J)
    if np.all(J > 0.0):
        return
    flat = int(np.argmin(J))
    if J.ndim == 2:
        e, q = np.unravel_index(flat, J.shape)
        raise InvertedElementError(float(J[e, q]), element=int(e), point=int(q),
                                   message=f"non-positive {what} = {float(J[e, q]):.6g} "
                                           f"in element {int(e)} at quadrature point {int(q)}")
    raise InvertedElementError(float(J.ravel()[flat]))


def deformation_gradients(u_e, dN_dX):
    """Batched ``F = I + grad_X u`` for element displacements.

    ``u_e`` is ``(ne, n, 3)``, ``dN_dX`` is ``(ne, nq, n, 3)``; returns
    ``(ne, nq, 3, 3)``.
    """
    return np.eye(3) + np.einsum("eni,eqnj->eqij", u_e, dN_dX)


def spatial_gradients(dN_dX, Finv):
    """Push reference gradients to the current configuration: dN/dx = dN/dX F^-1."""
    return np.einsum("...nJ,...Jj->...nj", dN_dX, Finv)


@dataclass(frozen=True)
class OperatorMatrices:
    G: np.ndarray
    D: np.ndarray


def operator_matrices(dN_dx):
    """Gradient- and divergence-displacement matrices for one point.

    ``dN_dx`` is ``(n, 3)``.  Returns ``G`` of shape ``(9, 3n)`` and ``D`` of
    shape ``(1, 3n)`` so that ``vec9(grad_x u) = G @ u`` and
    ``div u = D @ u`` for nodal displacements interleaved per node.
    """
    dN_dx = np.asarray(dN_dx, dtype=float)
    n = dN_dx.shape[0]
    G = np.zeros((9, 3 * n))
    for a in range(n):
        for j in range(3):
            for i in range(3):
                G[i + 3 * j, 3 * a + i] = dN_dx[a, j]
    D = dN_dx.reshape(1, 3 * n)
    return OperatorMatrices(G=G, D=D.copy())

"""Element residuals and tangents for the mixed formulations.

Every routine works on a batch of elements at once: displacement dofs
``u_e`` have shape ``(ne, n, 3)``, pressure dofs ``p_e`` ``(ne, m)``.  Local
displacement dofs are interleaved per node (x, y, z).

Two-field kinds share one code path driven by the constraint triple
``(C, dC/dJ, vartheta)``:

* ``weak_galerkin``          C = (dPsi_vol/dJ - p) / kappa
* ``proposed_consistent``    C = J - Jhat - theta_hat p   (frozen history)
* ``perturbed_lagrangian``   C = J - 1 - p / kappa
* ``truly_incompressible``   C = J - 1
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .elements import evaluate, map_jacobian
from .errors import CapabilityError, CondensationError, ConfigError, HistoryError, StateError
from .kinematics import check_positive, det3, deformation_gradients, inv3, spatial_gradients
from .materials import dev_eval, effective_cauchy, elasticity_tensor, vol_eval, vol_piola


class FormulationKind(str, Enum):
    PERTURBED_LAGRANGIAN = "perturbed_lagrangian"
    WEAK_GALERKIN = "weak_galerkin"
    PROPOSED_CONSISTENT = "proposed_consistent"
    THREE_FIELD = "three_field"
    TRULY_INCOMPRESSIBLE = "truly_incompressible"

    def __str__(self):
        return self.value


TWO_FIELD_KINDS = (
    FormulationKind.PERTURBED_LAGRANGIAN,
    FormulationKind.WEAK_GALERKIN,
    FormulationKind.PROPOSED_CONSISTENT,
    FormulationKind.TRULY_INCOMPRESSIBLE,
)


def resolve_kind(kind, material):
    """Validate the formulation for ``material``; ``nu = 0.5`` forces the
    truly incompressible path for every two-field formulation."""
    try:
        kind = FormulationKind(kind)
    except ValueError:
        raise ConfigError(
            f"unknown formulation {kind!r}; choose from {[k.value for k in FormulationKind]}") from None
    if material.incompressible:
        if kind == FormulationKind.THREE_FIELD:
            raise ConfigError("the three-field formulation needs a finite bulk modulus")
        return FormulationKind.TRULY_INCOMPRESSIBLE
    elif kind == FormulationKind.TRULY_INCOMPRESSIBLE:
        raise ConfigError("truly_incompressible requires nu = 0.5")
    return kind


# --- history ----------------------------------------------------------------

@dataclass
class QuadHistory:
    """Per-quadrature-point values frozen at the last converged load step."""

    J_prev: np.ndarray
    Jhat: np.ndarray
    theta_hat: np.ndarray


def update_history(vol, J_prev, incompressible=False):
    """Linearise ``dPsi_vol/dJ`` about the converged Jacobian ``J_prev``."""
    J_prev = np.asarray(J_prev, dtype=float)
    if incompressible or vol is None:
        return QuadHistory(J_prev.copy(), np.ones_like(J_prev), np.zeros_like(J_prev))
    _, d1, d2 = vol_eval(vol, J_prev)
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if np.any(~(d2 > 0.0)):
        bad = float(J_prev.ravel()[np.argmin(np.ravel(d2))])
        raise HistoryError(
            f"second derivative of the volumetric energy is not positive at J = {bad:.6g} "
            f"(V{vol.id}); the linearisation is undefined"
        )
    return QuadHistory(J_prev.copy(), J_prev - d1 / d2, 1.0 / d2)


def initial_history(vol, shape, incompressible=False):
    return update_history(vol, np.ones(shape), incompressible=incompressible)


def constraint_eval(kind, vol, J, p, history=None):
    """Constraint value and its linearisation coefficients ``(C, dC/dJ, vartheta)``.

    ``vol=None`` selects the truly incompressible branch ``C = J - 1``.
    """
    kind = FormulationKind(kind)
    J = np.asarray(J, dtype=float)
    p = np.asarray(p, dtype=float)
    one = np.ones(np.broadcast(J, p).shape)
    if vol is None or kind == FormulationKind.TRULY_INCOMPRESSIBLE:
        return _out(J - 1.0, one, 0.0 * one)
    if kind == FormulationKind.WEAK_GALERKIN:
        _, d1, d2 = vol_eval(vol, J)
        k = vol.kappa
        return _out((d1 - p) / k, np.asarray(d2) / k * one, one / k)
    if kind == FormulationKind.PERTURBED_LAGRANGIAN:
        k = vol.kappa
        return _out(J - 1.0 - p / k, one, one / k)
    if kind == FormulationKind.PROPOSED_CONSISTENT:
        if history is None:
            raise ConfigError("the proposed formulation needs the frozen history (Jhat, theta_hat)")
        Jhat = np.asarray(history.Jhat)
        th = np.asarray(history.theta_hat)
        return _out(J - Jhat - th * p, one, th * one)
    raise CapabilityError(f"no two-field constraint for {kind}")


def _out(C, dC, th):
    if np.ndim(C) == 0:
        return float(C), float(dC), float(th)
    return C, dC, th


# --- geometry ---------------------------------------------------------------

@dataclass
class ElementGeometry:
    """Reference-configuration data of a batch of elements."""

    element: object
    coords: np.ndarray
    Nu: np.ndarray
    Np: np.ndarray
    Nt: np.ndarray
    dN_dX: np.ndarray
    dV: np.ndarray

    @property
    def n_elements(self):
        return self.coords.shape[0]

    @property
    def volume(self):
        return self.dV.sum(axis=1)


def element_geometry(element, coords):
    """Precompute shape data for elements with node coordinates ``(ne, n, 3)``."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 2:
        coords = coords[None]
    rule = element.quadrature
    Nu, dNu = evaluate(element.displacement, rule.points)
    Np, _ = evaluate(element.pressure, rule.points)
    Nt, _ = evaluate(element.jacobian, rule.points)
    J0 = map_jacobian(coords, dNu)
    det0 = det3(J0)
    check_positive(det0, what="reference Jacobian")
    dN_dX = np.einsum("qna,eqaI->eqnI", dNu, inv3(J0, det0))
    return ElementGeometry(element, coords, Nu, Np, Nt, dN_dX, det0 * rule.weights)


# --- blocks -----------------------------------------------------------------

@dataclass
class ElementBlocks:
    """Dense per-element blocks, batched over the leading axis."""

    Kuu: np.ndarray
    Kup: np.ndarray
    Kpu: np.ndarray
    Kpp: np.ndarray
    Ru: np.ndarray
    Rp: np.ndarray
    J: np.ndarray
    Kut: Optional[np.ndarray] = None
    Ktu: Optional[np.ndarray] = None
    Ktt: Optional[np.ndarray] = None
    Ktp: Optional[np.ndarray] = None
    Kpt: Optional[np.ndarray] = None
    Rt: Optional[np.ndarray] = None

    @property
    def has_theta(self):
        return self.Rt is not None

    def lift(self, du_e):
        """Add ``K[:, u] du_e`` to every residual (prescribed-increment predictor)."""
        du = du_e.reshape(du_e.shape[0], -1)
        self.Ru = self.Ru + np.einsum("eab,eb->ea", self.Kuu, du)
        self.Rp = self.Rp + np.einsum("emb,eb->em", self.Kpu, du)
        if self.has_theta:
            self.Rt = self.Rt + np.einsum("emb,eb->em", self.Ktu, du)


def _mechanics(geom, material, u_e, p_qp, tangent=True):
    F = deformation_gradients(u_e, geom.dN_dX)
    J = det3(F)
    check_positive(J)
    Finv = inv3(F, J)
    dN_dx = spatial_gradients(geom.dN_dX, Finv)
    dv = J * geom.dV
    _, Pdev, Adev = dev_eval(material.dev, F, J, Finv, tangent=tangent)
    sigma = effective_cauchy(Pdev, F, J, p_qp)
    ne, nq, nn, _ = dN_dx.shape
    Ru = np.einsum("eqaj,eqij,eq->eai", dN_dx, sigma, dv).reshape(ne, 3 * nn)
    Kup = np.einsum("eqai,qm,eq->eaim", dN_dx, geom.Np, dv).reshape(ne, 3 * nn, -1)
    Kuu = None
    if tangent:
        E9 = elasticity_tensor(Adev, F, J, p_qp)
        G = np.zeros((ne, nq, 9, 3 * nn))
        for i in range(3):
            G[:, :, i::3, i::3] = np.swapaxes(dN_dx, -1, -2)
        EG = (E9 @ G).reshape(ne, nq * 9, 3 * nn)
        Gw = (G * dv[..., None, None]).reshape(ne, nq * 9, 3 * nn)
        Kuu = np.swapaxes(Gw, 1, 2) @ EG
    return dict(F=F, J=J, Finv=Finv, dN_dx=dN_dx, dv=dv, Ru=Ru, Kup=Kup, Kuu=Kuu)


def element_blocks_two_field(kind, geom, material, u_e, p_e, history=None, tangent=True):
    """Residual and tangent blocks of a two-field formulation.

    ``history`` is required for ``proposed_consistent`` (arrays ``(ne, nq)``).
    """
    kind = FormulationKind(kind)
    if kind not in TWO_FIELD_KINDS:
        raise CapabilityError(f"{kind} is not a two-field formulation")
    u_e = np.asarray(u_e, dtype=float).reshape(geom.n_elements, -1, 3)
    p_e = np.asarray(p_e, dtype=float).reshape(geom.n_elements, -1)
    p_qp = p_e @ geom.Np.T
    m = _mechanics(geom, material, u_e, p_qp, tangent=tangent)
    vol = None if material.incompressible else material.vol
    C, dC, th = constraint_eval(kind, vol, m["J"], p_qp, history=history)
    Np = geom.Np
    Rp = np.einsum("qm,eq,eq->em", Np, C, geom.dV)
    Kup = m["Kup"]
    if kind == FormulationKind.WEAK_GALERKIN:
        Kpu = np.einsum("eq,qm,eqai,eq->emai", dC, Np, m["dN_dx"], m["dv"]).reshape(Kup.shape[0], Np.shape[1], -1)
    else:
        Kpu = np.swapaxes(Kup, 1, 2).copy()
    Kpp = -np.einsum("eq,qm,qn,eq->emn", th, Np, Np, geom.dV)
    return ElementBlocks(Kuu=m["Kuu"], Kup=Kup, Kpu=Kpu, Kpp=Kpp, Ru=m["Ru"], Rp=Rp, J=m["J"])


def _three_field_general_coupling(material, F, J, Jbar):
    """``dP/dJbar`` and ``d2W/dJbar2`` for ``W(Fhat)``, ``Fhat = (Jbar/J)^(1/3) F``.

    Evaluated without using the deviatoric/volumetric split, so the zero
    coupling of split energies shows up as a numerical cancellation.
    """
    s = (Jbar / J) ** (1.0 / 3.0)
    Fh = s[..., None, None] * F
    Jh = det3(Fh)
    Fhinv = inv3(Fh, Jh)
    _, Pd, Ad = dev_eval(material.dev, Fh, Jh, Fhinv)
    Pv, Av = vol_piola(material.vol, Fh, Jh, Fhinv)
    P = Pd + Pv
    A = Ad + Av
    FinvT = np.swapaxes(inv3(F, J), -1, -2)
    dFh = Fh / (3.0 * Jbar)[..., None, None]
    dP = np.einsum("...iJkL,...kL->...iJ", A, dFh)
    PF = np.einsum("...iJ,...iJ->...", P, F)
    dPF = np.einsum("...iJ,...iJ->...", dP, F)
    ds = s / (3.0 * Jbar)
    dPeff = (
        ds[..., None, None] * P
        + s[..., None, None] * dP
        - (1.0 / 3.0) * FinvT * (ds * PF + s * dPF)[..., None, None]
    )
    d2W = np.einsum("...iJ,...iJ->...", dFh, np.einsum("...iJkL,...kL->...iJ", A, dFh))
    d2W = d2W - (2.0 / 9.0) * np.einsum("...iJ,...iJ->...", P, Fh) / Jbar**2
    return dPeff, d2W


def element_blocks_three_field(geom, material, u_e, theta_e, p_e, general=False, tangent=True):
    """Blocks of the displacement/Jacobian/pressure formulation with constant
    element-wise ``theta`` and ``p`` (``Jbar = 1 + theta``).

    With ``general=False`` the split-energy identities are used directly
    (``Kut = 0``, ``Ktt = Psi_vol''(Jbar) V``); ``general=True`` evaluates both
    from the unsplit energy of the modified deformation gradient.
    """
    if material.incompressible:
        raise ConfigError("the three-field formulation needs a finite bulk modulus")
    if geom.element.pressure.order != "constant":
        raise CapabilityError("the three-field formulation is provided for element-constant p and theta only")
    ne = geom.n_elements
    u_e = np.asarray(u_e, dtype=float).reshape(ne, -1, 3)
    theta = np.asarray(theta_e, dtype=float).reshape(ne)
    p = np.asarray(p_e, dtype=float).reshape(ne)
    Jbar = 1.0 + theta
    if np.any(~(Jbar > 0.0)):
        e = int(np.argmin(Jbar))
        raise StateError(f"non-positive Jbar = {Jbar[e]:.6g} in element {e}")
    nq = geom.dV.shape[1]
    p_qp = np.repeat(p[:, None], nq, axis=1)
    m = _mechanics(geom, material, u_e, p_qp, tangent=tangent)
    V0 = geom.volume
    _, d1, d2 = vol_eval(material.vol, Jbar)
    d1 = np.asarray(d1).reshape(ne)
    d2 = np.asarray(d2).reshape(ne)
    Kup = m["Kup"]
    nu = Kup.shape[1]
    Rt = (V0 * (d1 - p))[:, None]
    Rp = np.einsum("eq,eq->e", m["J"] - Jbar[:, None], geom.dV)[:, None]
    if general:
        Jb_qp = np.repeat(Jbar[:, None], nq, axis=1)
        dPeff, d2W = _three_field_general_coupling(material, m["F"], m["J"], Jb_qp)
        Kut = np.einsum("eqaJ,eqiJ,eq->eai", geom.dN_dX, dPeff, geom.dV).reshape(ne, nu, 1)
        Ktt = np.einsum("eq,eq->e", d2W, geom.dV)[:, None, None]
    else:
        Kut = np.zeros((ne, nu, 1))
        Ktt = (d2 * V0)[:, None, None]
    return ElementBlocks(
        Kuu=m["Kuu"], Kup=Kup, Kpu=np.swapaxes(Kup, 1, 2).copy(), Kpp=np.zeros((ne, 1, 1)),
        Ru=m["Ru"], Rp=Rp, J=m["J"],
        Kut=Kut, Ktu=np.swapaxes(Kut, 1, 2).copy(), Ktt=Ktt,
        Ktp=-V0[:, None, None], Kpt=-V0[:, None, None], Rt=Rt,
    )


# --- static condensation ----------------------------------------------------

@dataclass
class CondensedBlocks:
    """Condensed element stiffness and residual plus the recovery operators."""

    Khat: np.ndarray
    Rhat: np.ndarray
    Minv: np.ndarray
    C_iu: np.ndarray
    r_i: np.ndarray
    n_theta: int

    def recover(self, du_e):
        """Increments of the condensed unknowns, ordered ``[theta..., p...]``."""
        du = du_e.reshape(du_e.shape[0], -1)
        rhs = -self.r_i - np.einsum("eib,eb->ei", self.C_iu, du)
        return np.einsum("eij,ej->ei", self.Minv, rhs)


def condense(blocks, kind=None):
    """Eliminate element-discontinuous pressure (and theta) unknowns.

    Returns ``Khat = Kuu - K_ui M^-1 K_iu`` and ``Rhat = Ru - K_ui M^-1 r_i``
    where ``M`` is the internal block (``Kpp`` or ``[[Ktt, Ktp], [Kpt, 0]]``).
    """
    if blocks.has_theta:
        C_ui = np.concatenate([blocks.Kut, blocks.Kup], axis=2)
        C_iu = np.concatenate([blocks.Ktu, blocks.Kpu], axis=1)
        top = np.concatenate([blocks.Ktt, blocks.Ktp], axis=2)
        bot = np.concatenate([blocks.Kpt, blocks.Kpp], axis=2)
        M = np.concatenate([top, bot], axis=1)
        r_i = np.concatenate([blocks.Rt, blocks.Rp], axis=1)
        n_theta = blocks.Rt.shape[1]
    else:
        C_ui, C_iu, M, r_i, n_theta = blocks.Kup, blocks.Kpu, blocks.Kpp, blocks.Rp, 0
    det = np.linalg.det(M)
    if np.any(det == 0.0) or not np.all(np.isfinite(det)):
        e = int(np.argmin(np.abs(det)))
        label = f" for {FormulationKind(kind)}" if kind is not None else ""
        raise CondensationError(
            f"singular internal block in element {e}{label}; condensation unavailable, "
            "use the full saddle-point solve"
        )
    Minv = np.linalg.inv(M)
    T = np.einsum("eui,eij->euj", C_ui, Minv)
    Khat = blocks.Kuu - np.einsum("euj,ejb->eub", T, C_iu)
    Rhat = blocks.Ru - np.einsum("euj,ej->eu", T, r_i)
    return CondensedBlocks(Khat, Rhat, Minv, C_iu, r_i, n_theta)

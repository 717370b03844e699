"""Hyperelastic material models.

The strain energy is split as ``Psi = Psi_dev(Cbar) + Psi_vol(J)``.  The
deviatoric part is Neo-Hookean or Gent in the isochoric invariant
``I1bar = J^(-2/3) tr(C)``; the volumetric part is one of eight classical
functions V1..V8.  All evaluators are vectorised over leading axes.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, DomainError, MaterialLockupError
from .kinematics import DeformationState, det3, inv3

VOLUMETRIC_IDS = tuple(range(1, 9))

VOLUMETRIC_FORMULAS = {
    1: "k/50 (J^5 + J^-5 - 2)",
    2: "k/32 (J^2 - J^-2)^2",
    3: "k/2 (J - 1)^2",
    4: "k/4 (J^2 - 1 - 2 ln J)",
    5: "k/4 ((J - 1)^2 + (ln J)^2)",
    6: "k (J ln J - J + 1)",
    7: "k (J - ln J - 1)",
    8: "k/2 (ln J)^2",
}


@dataclass(frozen=True)
class VolumetricModel:
    id: int
    kappa: float

    def __post_init__(self):
        if self.id not in VOLUMETRIC_IDS:
            raise ConfigError(f"volumetric id must be one of 1..8, got {self.id}")
        if not self.kappa > 0.0:
            raise ConfigError(f"bulk modulus must be positive, got {self.kappa}")


def vol_eval(model, J):
    """Return ``(psi, dpsi/dJ, d2psi/dJ2)`` of the volumetric energy."""
    J = np.asarray(J, dtype=float)
    if np.any(~(J > 0.0)):
        raise DomainError(f"volumetric energy needs J > 0, got min J = {np.min(J)}")
    k = model.kappa
    i = model.id
    if i == 1:
        psi = k / 50.0 * (J**5 + J**-5 - 2.0)
        d1 = k / 10.0 * (J**4 - J**-6)
        d2 = k / 5.0 * (2.0 * J**3 + 3.0 * J**-7)
    elif i == 2:
        psi = k / 32.0 * (J**2 - J**-2) ** 2
        d1 = k / 8.0 * (J**2 - J**-2) * (J + J**-3)
        d2 = k / 8.0 * (3.0 * J**2 + 5.0 * J**-6)
    elif i == 3:
        psi = 0.5 * k * (J - 1.0) ** 2
        d1 = k * (J - 1.0)
        d2 = k * np.ones_like(J)
    elif i == 4:
        lnJ = np.log(J)
        psi = 0.25 * k * (J**2 - 1.0 - 2.0 * lnJ)
        d1 = 0.5 * k * (J - 1.0 / J)
        d2 = 0.5 * k * (1.0 + J**-2)
    elif i == 5:
        lnJ = np.log(J)
        psi = 0.25 * k * ((J - 1.0) ** 2 + lnJ**2)
        d1 = 0.5 * k * (J - 1.0 + lnJ / J)
        d2 = 0.5 * k / J**2 * (J**2 + 1.0 - lnJ)
    elif i == 6:
        lnJ = np.log(J)
        psi = k * (J * lnJ - J + 1.0)
        d1 = k * lnJ
        d2 = k / J
    elif i == 7:
        lnJ = np.log(J)
        psi = k * (J - lnJ - 1.0)
        d1 = k * (1.0 - 1.0 / J)
        d2 = k / J**2
    else:
        lnJ = np.log(J)
        psi = 0.5 * k * lnJ**2
        d1 = k * lnJ / J
        d2 = k / J**2 * (1.0 - lnJ)
    if psi.ndim == 0:
        return float(psi), float(d1), float(d2)
    return psi, d1, d2


@dataclass(frozen=True)
class DeviatoricModel:
    kind: str
    mu: float
    Im: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("neo_hookean", "gent"):
            raise ConfigError(f"unknown deviatoric model {self.kind!r}")
        if not self.mu > 0.0:
            raise ConfigError(f"shear modulus must be positive, got {self.mu}")
        if self.kind == "gent" and not (self.Im is not None and self.Im > 0.0):
            raise ConfigError("the Gent model needs a positive Im")


def _invariant_response(model, x):
    """``f(x)``, ``f'(x)``, ``f''(x)`` with ``x = I1bar - 3``."""
    mu = model.mu
    if model.kind == "neo_hookean":
        return 0.5 * mu * x, np.full_like(x, 0.5 * mu), np.zeros_like(x)
    Im = model.Im
    if np.any(x >= Im):
        flat = int(np.argmax(x))
        idx = np.unravel_index(flat, x.shape) if x.ndim else ()
        element = int(idx[0]) if len(idx) >= 1 else None
        point = int(idx[1]) if len(idx) >= 2 else None
        raise MaterialLockupError(float(x[idx]), Im, element=element, point=point)
    s = 1.0 - x / Im
    return -0.5 * mu * Im * np.log(s), 0.5 * mu / s, 0.5 * mu / (Im * s * s)


def dev_eval(model, F, J=None, Finv=None, tangent=True):
    """Deviatoric energy, first Piola stress and its derivative w.r.t. ``F``.

    ``F`` may be a :class:`DeformationState` or an array ``(..., 3, 3)``.
    Returns ``(psi, Pdev, Adev)`` with ``Adev[..., i, J, k, L] =
    dPdev_iJ / dF_kL``; ``Adev`` is ``None`` when ``tangent`` is false.
    """
    if isinstance(F, DeformationState):
        F = F.F
    F = np.asarray(F, dtype=float)
    if J is None:
        J = det3(F)
    if np.any(~(J > 0.0)):
        raise DomainError("deviatoric response needs J > 0")
    if Finv is None:
        Finv = inv3(F, J)
    FinvT = np.swapaxes(Finv, -1, -2)
    g = J ** (-2.0 / 3.0)
    I1 = np.einsum("...ij,...ij->...", F, F)
    x = g * I1 - 3.0
    psi, f1, f2 = _invariant_response(model, x)
    # dI1bar/dF = g (2F - 2/3 I1 F^-T)
    dI = g[..., None, None] * (2.0 * F - (2.0 / 3.0) * I1[..., None, None] * FinvT)
    P = f1[..., None, None] * dI
    if not tangent:
        return psi, P, None
    eye = np.eye(3)
    gg = g[..., None, None, None, None]
    d2I = (
        -(2.0 / 3.0) * np.einsum("...kl,...ij->...ijkl", FinvT, dI)
        + gg * 2.0 * np.einsum("ik,jl->ijkl", eye, eye)
        - gg * (4.0 / 3.0) * np.einsum("...kl,...ij->...ijkl", F, FinvT)
        + gg * (2.0 / 3.0) * I1[..., None, None, None, None]
        * np.einsum("...il,...kj->...ijkl", FinvT, FinvT)
    )
    A = (
        f2[..., None, None, None, None] * np.einsum("...ij,...kl->...ijkl", dI, dI)
        + f1[..., None, None, None, None] * d2I
    )
    return psi, P, A


def effective_cauchy(Pdev, F, J, p):
    """``sigma = Pdev F^T / J + p I``."""
    J = np.asarray(J, dtype=float)
    p = np.asarray(p, dtype=float)
    sig = np.einsum("...iJ,...jJ->...ij", Pdev, F) / J[..., None, None]
    return sig + p[..., None, None] * np.eye(3)


def spatial_tangent(Adev, F, J, p):
    """Fourth-order spatial tensor ``e[..., i, j, k, l]``."""
    J = np.asarray(J, dtype=float)
    p = np.asarray(p, dtype=float)
    eye = np.eye(3)
    e = np.einsum("...jJ,...iJkL,...lL->...ijkl", F, Adev, F) / J[..., None, None, None, None]
    geo = np.einsum("ij,kl->ijkl", eye, eye) - np.einsum("il,jk->ijkl", eye, eye)
    return e + p[..., None, None, None, None] * geo


_GEO9 = (np.einsum("ij,kl->ijkl", np.eye(3), np.eye(3)) - np.einsum("il,jk->ijkl", np.eye(3), np.eye(3)))
_GEO9 = _GEO9.transpose(1, 0, 3, 2).reshape(9, 9)


def elasticity_tensor(Adev, F, J, p):
    """Spatial elasticity tensor flattened to ``(..., 9, 9)``.

    Row ``i + 3j`` and column ``k + 3l`` hold ``e_ijkl``, matching the
    component order of the gradient-displacement matrix.  Same values as
    :func:`spatial_tangent`, computed with batched matrix products.
    """
    J = np.asarray(J, dtype=float)
    p = np.asarray(p, dtype=float)
    sh = Adev.shape[:-4]
    FT = np.swapaxes(F, -1, -2)
    T = (Adev.reshape(sh + (27, 3)) @ FT).reshape(sh + (3, 3, 3, 3))      # [i, J, k, l]
    T = np.moveaxis(T, -3, -1).reshape(sh + (27, 3)) @ FT                 # [i, k, l, j]
    e = T.reshape(sh + (3, 3, 3, 3))
    e = np.moveaxis(e, -1, -4)                                            # [j, i, k, l]
    e = np.swapaxes(e, -1, -2).reshape(sh + (9, 9)) / J[..., None, None]
    return e + p[..., None, None] * _GEO9


def shear_modulus(E, nu):
    return E / (2.0 * (1.0 + nu))


def bulk_modulus(E, nu):
    """Isotropic ``E / (3 (1 - 2 nu))``; infinite at ``nu = 0.5``."""
    if nu >= 0.5:
        return np.inf
    return E / (3.0 * (1.0 - 2.0 * nu))


@dataclass(frozen=True)
class Material:
    """Deviatoric model plus volumetric model.

    ``vol`` is ``None`` for a truly incompressible material (``nu = 0.5``).
    """

    dev: DeviatoricModel
    vol: Optional[VolumetricModel]
    nu: Optional[float] = None
    E: Optional[float] = None

    @property
    def incompressible(self):
        return self.vol is None

    @property
    def kappa(self):
        return np.inf if self.vol is None else self.vol.kappa

    @classmethod
    def from_parameters(cls, deviatoric="neo_hookean", E=None, nu=None, mu=None,
                        kappa=None, Im=None, volumetric=3):
        """Build from ``(E, nu)`` or directly from ``(mu, kappa)``."""
        if E is not None and nu is not None:
            if not 0.0 < nu <= 0.5:
                raise ConfigError(f"Poisson's ratio must lie in (0, 0.5], got {nu}")
            mu = shear_modulus(E, nu)
            kappa = None if nu == 0.5 else bulk_modulus(E, nu)
        elif mu is None:
            raise ConfigError("give either (E, nu) or mu [and kappa]")
        vol = None if kappa is None or not np.isfinite(kappa) else VolumetricModel(int(volumetric), float(kappa))
        return cls(dev=DeviatoricModel(deviatoric, float(mu), None if Im is None else float(Im)),
                   vol=vol, nu=nu, E=E)


def vol_piola(model, F, J=None, Finv=None):
    """Volumetric first Piola stress ``Psi_vol'(J) J F^-T`` and its F-derivative."""
    F = np.asarray(F, dtype=float)
    if J is None:
        J = det3(F)
    if Finv is None:
        Finv = inv3(F, J)
    FinvT = np.swapaxes(Finv, -1, -2)
    _, d1, d2 = vol_eval(model, J)
    d1 = np.asarray(d1)
    d2 = np.asarray(d2)
    P = (d1 * J)[..., None, None] * FinvT
    A = ((d2 * J + d1) * J)[..., None, None, None, None] * np.einsum("...ij,...kl->...ijkl", FinvT, FinvT)
    A = A - (d1 * J)[..., None, None, None, None] * np.einsum("...il,...kj->...ijkl", FinvT, FinvT)
    return P, A

"""Independent oracles: finite-difference tangent checks, the Legendre
transform of the volumetric energy, a homogeneous uniaxial-tension solver and
the volumetric pressure sweep."""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, MaterialLockupError, OracleRangeError, UnboundedTransformError
from .formulations import (
    FormulationKind,
    QuadHistory,
    element_blocks_three_field,
    element_blocks_two_field,
    update_history,
)
from .materials import VOLUMETRIC_IDS, VolumetricModel, dev_eval, vol_eval

# --- finite-difference tangent check ----------------------------------------

BLOCK_LAYOUT = {
    # block name: (residual, unknown)
    "Kuu": ("Ru", "u"), "Kup": ("Ru", "p"), "Kpu": ("Rp", "u"), "Kpp": ("Rp", "p"),
    "Kut": ("Ru", "t"), "Ktu": ("Rt", "u"), "Ktt": ("Rt", "t"), "Ktp": ("Rt", "p"), "Kpt": ("Rp", "t"),
}


def _residuals(kind, geom, material, u, p, t, history):
    if kind == FormulationKind.THREE_FIELD:
        b = element_blocks_three_field(geom, material, u, t, p, tangent=False)
        return {"Ru": b.Ru[0], "Rp": b.Rp[0], "Rt": b.Rt[0]}
    b = element_blocks_two_field(kind, geom, material, u, p, history=history, tangent=False)
    return {"Ru": b.Ru[0], "Rp": b.Rp[0]}


def fd_tangent_check(kind, geom, material, u_e, p_e, theta_e=None, history=None, h=1e-6):
    """Worst relative Frobenius error of each analytic block against central
    differences of the element residual.

    ``geom`` holds a single element.  The step for unknown ``x_i`` is
    ``h * max(1, |x_i|)``.  A block that is zero analytically is compared
    relative to the norm of the whole element matrix.
    """
    if not 1e-8 <= h <= 1e-4:
        raise DomainError(f"finite-difference step must lie in [1e-8, 1e-4], got {h}")
    kind = FormulationKind(kind)
    x = {
        "u": np.asarray(u_e, dtype=float).reshape(1, -1, 3).copy(),
        "p": np.asarray(p_e, dtype=float).reshape(1, -1).copy(),
    }
    if kind == FormulationKind.THREE_FIELD:
        x["t"] = np.asarray(theta_e, dtype=float).reshape(1, -1).copy()
        blocks = element_blocks_three_field(geom, material, x["u"], x["t"], x["p"])
    else:
        x["t"] = None
        blocks = element_blocks_two_field(kind, geom, material, x["u"], x["p"], history=history)

    def resid(xx):
        return _residuals(kind, geom, material, xx["u"], xx["p"], xx["t"], history)

    fd = {}
    for var in ("u", "p", "t"):
        if x[var] is None:
            continue
        flat = x[var].reshape(-1)
        cols = {}
        for i in range(flat.size):
            step = h * max(1.0, abs(flat[i]))
            plus = {k: (None if v is None else v.copy()) for k, v in x.items()}
            minus = {k: (None if v is None else v.copy()) for k, v in x.items()}
            plus[var].reshape(-1)[i] += step
            minus[var].reshape(-1)[i] -= step
            rp, rm = resid(plus), resid(minus)
            for name in rp:
                cols.setdefault(name, []).append((rp[name] - rm[name]) / (2.0 * step))
        for name, c in cols.items():
            fd[(name, var)] = np.column_stack(c)
    total = 0.0
    analytic = {}
    for block, (res, var) in BLOCK_LAYOUT.items():
        K = getattr(blocks, block)
        if K is None or (res, var) not in fd:
            continue
        analytic[block] = K[0]
        total = max(total, float(np.linalg.norm(K[0])))
    errors = {}
    for block, K in analytic.items():
        diff = np.linalg.norm(fd[BLOCK_LAYOUT[block]] - K)
        scale = np.linalg.norm(K)
        if scale <= 1e-12 * total:
            scale = total
        errors[block] = float(diff / scale) if scale > 0 else float(diff)
    return errors


def random_element_state(geom, material, rng, amplitude=0.15, kind="proposed_consistent", jbar_max=None):
    """Random admissible element state ``(u_e, p_e, theta_e, history)``.

    Displacements are ``amplitude`` times a random field scaled by the
    element size; pressures are of the order of the shear modulus.
    """
    kind = FormulationKind(kind)
    n = geom.coords.shape[1]
    size = float(np.ptp(geom.coords[0], axis=0).max())
    m = geom.Np.shape[1]
    mu = material.dev.mu
    for _ in range(100):
        u = amplitude * size * rng.uniform(-1.0, 1.0, size=(1, n, 3))
        F = np.eye(3) + np.einsum("eni,eqnj->eqij", u, geom.dN_dX)
        if np.linalg.det(F).min() > 0.2:
            break
    else:
        raise DomainError("could not sample an admissible element state")
    p = mu * rng.uniform(-1.0, 1.0, size=(1, m))
    theta = None
    history = None
    if kind == FormulationKind.THREE_FIELD:
        hi = 0.3 if jbar_max is None else min(0.3, jbar_max - 1.0 - 1e-3)
        theta = rng.uniform(-0.2, hi, size=(1, 1))
    elif kind == FormulationKind.PROPOSED_CONSISTENT:
        nq = geom.dV.shape[1]
        J_prev = rng.uniform(0.8, 1.25, size=(1, nq))
        history = update_history(material.vol, J_prev, incompressible=material.incompressible)
    return u, p, theta, history


def fd_convergence_order(kind, geom, material, state, h=1e-4, block="Kuu"):
    """Observed order of the central-difference error when ``h`` is halved
    (around 2 for a consistent tangent)."""
    u, p, t, hist = state
    e1 = fd_tangent_check(kind, geom, material, u, p, t, hist, h=h)[block]
    e2 = fd_tangent_check(kind, geom, material, u, p, t, hist, h=h / 2)[block]
    return float(np.log2(e1 / e2)), e1, e2


# --- Legendre transform -----------------------------------------------------

@dataclass
class LegendreResult:
    p: float
    Gamma: float
    J_star: float
    method: str
    stationary_points: list = field(default_factory=list)

    @property
    def multiple_roots(self):
        return len(self.stationary_points) > 1


def gamma_closed_form_v3(kappa, p):
    """``Gamma_3(p) = -p (1 + p / (2 kappa))`` with minimiser ``1 + p / kappa``."""
    return -p * (1.0 + p / (2.0 * kappa)), 1.0 + p / kappa


def legendre_transform(vol, p, method="auto", J_range=(1e-3, 50.0), samples=200):
    """Complementary potential ``Gamma(p) = inf_J [Psi_vol(J) - p J]``.

    ``method="grid_newton"`` scans ``samples`` log-spaced points of
    ``J_range`` for sign changes of ``Psi_vol'(J) - p``, polishes every root
    with safeguarded Newton iterations, reports them all, and returns the one
    with the lowest value.  An infimum at the edge of the scanned range raises
    :class:`UnboundedTransformError`.  ``"auto"`` uses the closed form for V3.
    """
    p = float(p)
    if method == "auto":
        method = "closed_form" if vol.id == 3 else "grid_newton"
    if method == "closed_form":
        if vol.id != 3:
            raise DomainError("a closed-form transform is only available for V3")
        G, J = gamma_closed_form_v3(vol.kappa, p)
        if not J > 0.0:
            raise UnboundedTransformError(f"V3 transform needs p > -kappa, got p = {p}")
        return LegendreResult(p, G, J, "closed_form", [J])
    if method != "grid_newton":
        raise DomainError(f"unknown method {method!r}")
    lo, hi = J_range
    grid = np.geomspace(lo, hi, samples)
    psi, d1, _ = vol_eval(vol, grid)
    f = d1 - p
    roots = []
    for i in np.flatnonzero(np.sign(f[:-1]) * np.sign(f[1:]) <= 0.0):
        if f[i] == 0.0 and i > 0 and f[i - 1] == 0.0:
            continue
        roots.append(_polish(vol, p, grid[i], grid[i + 1]))
    roots = sorted(set(round(r, 14) for r in roots))
    values = [vol_eval(vol, r)[0] - p * r for r in roots]
    minima = [(v, r) for v, r in zip(values, roots) if vol_eval(vol, r)[2] > 0.0]
    edge = min(psi[0] - p * lo, psi[-1] - p * hi)
    if not minima or min(minima)[0] > edge:
        raise UnboundedTransformError(
            f"no finite minimiser of Psi_vol(J) - p J for V{vol.id}, p = {p:.6g} in J in [{lo}, {hi}]")
    G, J = min(minima)
    return LegendreResult(p, float(G), float(J), "grid_newton", list(roots))


def _polish(vol, p, a, b, tol=1e-15):
    """Root of ``Psi'(J) = p`` in ``[a, b]``: Newton, bisection when it leaves
    the bracket."""
    fa = vol_eval(vol, a)[1] - p
    J = 0.5 * (a + b)
    for _ in range(100):
        _, d1, d2 = vol_eval(vol, J)
        f = d1 - p
        if f == 0.0:
            return J
        if np.sign(f) == np.sign(fa):
            a, fa = J, f
        else:
            b = J
        step = f / d2 if d2 != 0.0 else np.inf
        Jn = J - step
        if not a < Jn < b:
            Jn = 0.5 * (a + b)
        if abs(Jn - J) <= tol * max(1.0, abs(J)):
            return Jn
        J = Jn
    return J


def gamma_derivative(vol, p, dp=1e-6, **kw):
    """Central difference ``dGamma/dp``; equals ``-J_star`` by duality."""
    step = dp * max(1.0, abs(p))
    gp = legendre_transform(vol, p + step, **kw).Gamma
    gm = legendre_transform(vol, p - step, **kw).Gamma
    return (gp - gm) / (2.0 * step)


# --- uniaxial oracle --------------------------------------------------------

@dataclass(frozen=True)
class UniaxialState:
    stretch: float
    lateral_stretch: float
    axial_stress: float
    pressure: float


def _cauchy_diag(material, lam, lt):
    F = np.diag([lam, lt, lt])
    J = lam * lt * lt
    _, P, _ = dev_eval(material.dev, F, J=np.asarray(J), tangent=False)
    dev = P @ F.T / J
    return np.diag(dev), J


def uniaxial_oracle(material, stretch, bracket=(1e-3, 1e3), samples=400):
    """Homogeneous uniaxial tension ``F = diag(stretch, lt, lt)`` with
    traction-free lateral faces; returns the exact :class:`UniaxialState`.

    Compressible materials solve ``sigma_lateral(lt) = 0`` by a grid scan
    followed by Brent's method; the incompressible branch uses
    ``lt = stretch^(-1/2)`` and takes the pressure from lateral equilibrium.
    """
    lam = float(stretch)
    if not lam > 0.0:
        raise DomainError(f"stretch must be positive, got {stretch}")
    if material.incompressible:
        lt = lam ** -0.5
        try:
            s, _ = _cauchy_diag(material, lam, lt)
        except MaterialLockupError as exc:
            raise OracleRangeError(f"uniaxial state beyond the material limit: {exc}") from exc
        p = -s[1]
        return UniaxialState(lam, lt, float(s[0] + p), float(p))

    def lateral(lt):
        s, J = _cauchy_diag(material, lam, lt)
        return s[1] + vol_eval(material.vol, J)[1]

    grid = np.geomspace(*bracket, samples)
    vals = np.full(samples, np.nan)
    for i, g in enumerate(grid):
        try:
            vals[i] = lateral(g)
        except (MaterialLockupError, DomainError):
            pass
    ok = np.isfinite(vals)
    idx = [i for i in range(samples - 1) if ok[i] and ok[i + 1] and vals[i] * vals[i + 1] <= 0.0]
    if not idx:
        raise OracleRangeError(f"no lateral-equilibrium root for stretch {lam} in {bracket}")
    # several sign changes can only appear next to a lockup boundary; the
    # physical branch is the one closest to the isochoric stretch
    i = min(idx, key=lambda k: abs(np.log(grid[k]) + 0.5 * np.log(lam)))
    lt = brentq(lateral, grid[i], grid[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    s, J = _cauchy_diag(material, lam, lt)
    p = vol_eval(material.vol, J)[1]
    return UniaxialState(lam, float(lt), float(s[0] + p), float(p))


# --- volumetric sweep -------------------------------------------------------

SWEEP_WINDOWS = {"near_unity": (0.95, 1.05), "wide": (0.05, 5.0)}


def volumetric_sweep(ids=VOLUMETRIC_IDS, kappa=1.0, J_range=(0.05, 5.0), samples=101, include=(1.0, 5.0)):
    """Pressure ``p = Psi_vol'(J)`` on a uniform grid for each volumetric id.

    Returns ``(J, {id: p})``; the values in ``include`` that fall inside
    ``J_range`` are added to the grid so J = 1 and J = 5 are sampled exactly.
    """
    lo, hi = J_range
    if not 0.0 < lo < hi:
        raise DomainError(f"J range must satisfy 0 < lo < hi, got {J_range}")
    J = np.linspace(lo, hi, samples)
    extra = [v for v in include if lo <= v <= hi]
    J = np.unique(np.concatenate([J, extra]))
    table = {i: np.asarray(vol_eval(VolumetricModel(i, kappa), J)[1]) for i in ids}
    return J, table


def write_sweep_csv(path, J, table):
    ids = sorted(table)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["J"] + [f"p_V{i}" for i in ids])
        for k, j in enumerate(J):
            w.writerow([f"{j:.10g}"] + [f"{table[i][k]:.12g}" for i in ids])


def read_sweep_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    ids = [int(h.split("V")[1]) for h in header[1:]]
    return data[:, 0], {i: data[:, k + 1] for k, i in enumerate(ids)}


def sweep_properties(J, table, kappa=1.0):
    """Checks used by the sweep report: zero pressure at J = 1, the ordering
    at J = 5 and the near-unity spread (in units of ``kappa``)."""
    ids = sorted(table)
    out = {}
    i1 = np.flatnonzero(np.isclose(J, 1.0, rtol=0.0, atol=1e-12))
    if len(i1):
        out["max_abs_p_at_1"] = max(abs(float(table[i][i1[0]])) for i in ids)
    i5 = np.flatnonzero(np.isclose(J, 5.0, rtol=0.0, atol=1e-12))
    if len(i5):
        vals = [float(table[i][i5[0]]) for i in ids]
        out["ordering_at_5"] = all(a > b for a, b in zip(vals, vals[1:]))
        out["p_at_5"] = dict(zip(ids, vals))
    near = (J >= 0.95 - 1e-12) & (J <= 1.05 + 1e-12)
    if near.any():
        P = np.array([table[i][near] for i in ids])
        out["near_unity_spread"] = float((P.max(axis=0) - P.min(axis=0)).max() / kappa)
    return out


__all__ = [
    "LegendreResult", "UniaxialState", "QuadHistory", "fd_tangent_check", "fd_convergence_order",
    "random_element_state", "legendre_transform", "gamma_closed_form_v3", "gamma_derivative",
    "uniaxial_oracle", "volumetric_sweep", "write_sweep_csv", "read_sweep_csv", "sweep_properties",
]

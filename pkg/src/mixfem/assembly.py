"""Degree-of-freedom bookkeeping, global assembly, linear solves and the
Newton-Raphson load-stepping driver.

Global unknowns live in a "full" index space: all nodal displacement
components first (``3 * node + component``), then pressure unknowns, then
element Jacobian unknowns (three-field only).  Prescribed displacement
components are removed by slicing, so the solved system holds free rows only.
When pressures (and Jacobians) are element-discontinuous and the internal
block is invertible they are statically condensed and the full space reduces
to displacements.
"""

import csv
import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

try:  # optional supernodal Cholesky
    from cvxopt import cholmod as _cholmod
    from cvxopt import matrix as _cvx_matrix
    from cvxopt import spmatrix as _cvx_spmatrix

    _cholmod.options["supernodal"] = 2
    _cholmod.options["print"] = 0
except ImportError:  # pragma: no cover
    _cholmod = None

from .elements import face_basis, face_rule, mixed_element
from .errors import (
    CondensationError,
    ConfigError,
    ConvergenceError,
    DomainError,
    InvertedElementError,
    MaterialLockupError,
    MixfemError,
    SolverError,
    StateError,
)
from .formulations import (
    FormulationKind,
    condense,
    element_blocks_three_field,
    element_blocks_two_field,
    element_geometry,
    initial_history,
    resolve_kind,
    update_history,
)

log = logging.getLogger(__name__)

ADMISSIBILITY_ERRORS = (InvertedElementError, MaterialLockupError, StateError, DomainError)
STRUCTURES = ("symmetric_indefinite", "unsymmetric", "spd")
COMPONENTS = {"x": 0, "y": 1, "z": 2, 0: 0, 1: 1, 2: 2}


# --- problem description ----------------------------------------------------

@dataclass(frozen=True)
class DirichletBC:
    set_name: str
    component: int
    value: float


@dataclass(frozen=True)
class NeumannBC:
    """Dead traction (force per reference area) on a face set."""

    set_name: str
    traction: tuple


@dataclass
class LoadProgram:
    n_steps: int = 1
    factors: Optional[np.ndarray] = None

    def __post_init__(self):
        if int(self.n_steps) < 1:
            raise ConfigError("a load program needs at least one step")
        self.n_steps = int(self.n_steps)
        if self.factors is None:
            self.factors = np.arange(1, self.n_steps + 1) / self.n_steps
        self.factors = np.asarray(self.factors, dtype=float)
        if len(self.factors) != self.n_steps:
            raise ConfigError("number of load factors must equal n_steps")


@dataclass(frozen=True)
class Tolerances:
    tol_abs: float = 1e-8
    tol_rel: float = 1e-10
    max_iter: int = 20


@dataclass
class Problem:
    mesh: object
    element: object
    kind: FormulationKind
    material: object
    dirichlet: list = field(default_factory=list)
    neumann: list = field(default_factory=list)
    body_force: Optional[tuple] = None
    condense: Optional[bool] = None  # None: automatic
    history: Optional[str] = None    # "element" or "point"; None: automatic

    def __post_init__(self):
        if isinstance(self.element, str):
            self.element = mixed_element(self.element)
        if self.element.cell_type != self.mesh.cell_type:
            raise ConfigError(
                f"element pair {self.element.name} needs {self.element.cell_type} cells, "
                f"mesh has {self.mesh.cell_type}"
            )
        self.kind = resolve_kind(self.kind, self.material)
        for bc in self.dirichlet:
            self.mesh.set_nodes(bc.set_name)
        for bc in self.neumann:
            if bc.set_name not in self.mesh.face_sets:
                raise ConfigError(f"traction set {bc.set_name!r} is not a face set of the mesh")
        if self.history is None:
            self.history = "element" if self.element.pressure_is_discontinuous else "point"
        if self.history not in ("element", "point"):
            raise ConfigError(f"history granularity must be 'element' or 'point', got {self.history!r}")
        if self.condense is None:
            self.condense = self.element.pressure_is_discontinuous and not self._singular_internal()
        elif self.condense and not self.element.pressure_is_discontinuous:
            raise CondensationError("condensation needs an element-discontinuous pressure")
        elif self.condense and self._singular_internal():
            raise CondensationError(f"Kpp is singular for {self.kind}; use the full saddle-point solve")

    def _singular_internal(self):
        if self.kind == FormulationKind.THREE_FIELD:
            return False
        return self.material.incompressible

    @property
    def three_field(self):
        return self.kind == FormulationKind.THREE_FIELD

    @property
    def structure(self):
        """Linear-solver structure implied by the formulation."""
        if self.kind == FormulationKind.WEAK_GALERKIN and not self.material.incompressible \
                and self.material.vol.id != 3:
            return "unsymmetric"
        return "symmetric_indefinite"


# --- dof map ----------------------------------------------------------------

class DofMap:
    """Index bookkeeping for displacement, pressure and Jacobian unknowns."""

    def __init__(self, problem):
        mesh = problem.mesh
        el = problem.element
        self.n_nodes = mesh.n_nodes
        self.n_elements = mesh.n_cells
        self.n_u = 3 * self.n_nodes
        cells = mesh.cells
        self.ue = (3 * cells[:, :, None] + np.arange(3)).reshape(self.n_elements, -1)
        if el.pressure_is_discontinuous:
            self.p_nodes = None
            self.n_p = self.n_elements
            self.pe_local = np.arange(self.n_elements)[:, None]
        else:
            nv = el.pressure.n_functions
            self.p_nodes = np.unique(cells[:, :nv])
            lookup = np.full(self.n_nodes, -1)
            lookup[self.p_nodes] = np.arange(len(self.p_nodes))
            self.n_p = len(self.p_nodes)
            self.pe_local = lookup[cells[:, :nv]]
        self.n_theta = self.n_elements if problem.three_field else 0
        self.te_local = np.arange(self.n_elements)[:, None] if self.n_theta else None
        self.condensed = bool(problem.condense)

        prescribed = {}
        for bc in problem.dirichlet:
            for n in problem.mesh.set_nodes(bc.set_name):
                prescribed[3 * int(n) + bc.component] = float(bc.value)
        self.constrained = np.array(sorted(prescribed), dtype=int)
        self.constrained_values = np.array([prescribed[i] for i in self.constrained], dtype=float)
        mask = np.ones(self.n_u, dtype=bool)
        mask[self.constrained] = False
        self.free_u = np.flatnonzero(mask)

        if self.condensed:
            self.n_full = self.n_u
        else:
            self.n_full = self.n_u + self.n_p + self.n_theta
        self.p_offset = self.n_u
        self.t_offset = self.n_u + self.n_p
        self.free = self.free_u if self.condensed else np.concatenate(
            [self.free_u, np.arange(self.n_u, self.n_full)])
        # equation number of every full-space index (-1 for prescribed)
        self.equation = np.full(self.n_full, -1)
        self.equation[self.free] = np.arange(len(self.free))

    @property
    def n_equations(self):
        return len(self.free)

    def element_indices(self):
        """Full-space indices of every element's local unknowns, ordered
        ``[u..., theta..., p...]`` (matching the element matrix layout)."""
        parts = [self.ue]
        if not self.condensed:
            if self.n_theta:
                parts.append(self.t_offset + self.te_local)
            parts.append(self.p_offset + self.pe_local)
        return np.hstack(parts)

    def describe(self, eq):
        """Human-readable name of equation ``eq`` of the solved system."""
        i = int(self.free[eq])
        if i < self.n_u:
            return f"displacement dof {i} (node {i // 3}, component {'xyz'[i % 3]})"
        if i < self.t_offset:
            j = i - self.p_offset
            where = f"element {j}" if self.p_nodes is None else f"node {int(self.p_nodes[j])}"
            return f"pressure dof {j} ({where})"
        return f"jacobian dof {i - self.t_offset} (element {i - self.t_offset})"


# --- state ------------------------------------------------------------------

@dataclass
class SolutionState:
    u: np.ndarray        # (n_nodes, 3)
    p: np.ndarray        # (n_p,)
    theta: np.ndarray    # (n_theta,)
    history: object = None

    def copy(self):
        return SolutionState(self.u.copy(), self.p.copy(), self.theta.copy(), self.history)


def initial_state(problem, dofs):
    nq = len(problem.element.quadrature.weights)
    hist = initial_history(problem.material.vol, (dofs.n_elements, nq),
                           incompressible=problem.material.incompressible)
    return SolutionState(np.zeros((dofs.n_nodes, 3)), np.zeros(dofs.n_p), np.zeros(dofs.n_theta), hist)


# --- assembly ---------------------------------------------------------------

@dataclass
class Assembled:
    """Global system in the full index space plus element data for recovery."""

    K: Optional[sp.csr_matrix]
    R: np.ndarray               # full-space residual (internal minus external)
    R_mixed_norm_parts: tuple   # (Ru, Rp, Rt) assembled, for reporting
    J: np.ndarray               # (ne, nq) Jacobians at the state
    condensed: object = None
    blocks: object = None


class Assembler:
    """Element geometry cache and global scatter for one problem."""

    def __init__(self, problem, dofs=None):
        self.problem = problem
        self.dofs = dofs or DofMap(problem)
        mesh = problem.mesh
        self.geom = element_geometry(problem.element, mesh.nodes[mesh.cells])
        self.f_ext_unit = external_force(problem, self.dofs)
        idx = self.dofs.element_indices()
        n = idx.shape[1]
        self._rows = np.repeat(idx, n, axis=1).ravel()
        self._cols = np.tile(idx, (1, n)).ravel()
        self._idx = idx

    def element_blocks(self, state, tangent=True):
        pb = self.problem
        d = self.dofs
        u_e = state.u[pb.mesh.cells]
        p_e = state.p[d.pe_local]
        if pb.three_field:
            return element_blocks_three_field(self.geom, pb.material, u_e, state.theta[d.te_local], p_e,
                                              tangent=tangent)
        return element_blocks_two_field(pb.kind, self.geom, pb.material, u_e, p_e,
                                        history=state.history, tangent=tangent)

    def assemble(self, state, load_factor=1.0, tangent=True):
        """Global tangent and residual ``R = R_int - load_factor * F_ext``."""
        d = self.dofs
        b = self.element_blocks(state, tangent=tangent)
        Ru = np.zeros(d.n_u)
        np.add.at(Ru, d.ue.ravel(), b.Ru.ravel())
        Ru -= load_factor * self.f_ext_unit
        Rp = np.zeros(d.n_p)
        np.add.at(Rp, d.pe_local.ravel(), b.Rp.ravel())
        Rt = np.zeros(d.n_theta)
        if d.n_theta:
            Rt[d.te_local.ravel()] = b.Rt.ravel()
        cb = None
        if d.condensed:
            cb = condense(b, self.problem.kind)
            # condensed residual: scatter Rhat, external load added separately
            R = np.zeros(d.n_u)
            np.add.at(R, d.ue.ravel(), cb.Rhat.ravel())
            R -= load_factor * self.f_ext_unit
            Ke = cb.Khat if tangent else None
        else:
            R = np.concatenate([Ru, Rp, Rt])
            Ke = _element_matrix(b) if tangent else None
        K = None
        if tangent:
            K = sp.coo_matrix((Ke.ravel(), (self._rows, self._cols)), shape=(d.n_full, d.n_full)).tocsr()
            K.sum_duplicates()
        return Assembled(K=K, R=R, R_mixed_norm_parts=(Ru, Rp, Rt), J=b.J, condensed=cb, blocks=b)

    def mixed_residual_norm(self, parts):
        Ru, Rp, Rt = parts
        return float(np.sqrt(np.sum(Ru[self.dofs.free_u] ** 2) + np.sum(Rp**2) + np.sum(Rt**2)))


def _element_matrix(b):
    """Dense element matrix in ``[u, theta, p]`` local ordering."""
    if b.has_theta:
        top = np.concatenate([b.Kuu, b.Kut, b.Kup], axis=2)
        mid = np.concatenate([b.Ktu, b.Ktt, b.Ktp], axis=2)
        bot = np.concatenate([b.Kpu, b.Kpt, b.Kpp], axis=2)
        return np.concatenate([top, mid, bot], axis=1)
    top = np.concatenate([b.Kuu, b.Kup], axis=2)
    bot = np.concatenate([b.Kpu, b.Kpp], axis=2)
    return np.concatenate([top, bot], axis=1)


def assemble(problem, state, dofs=None, load_factor=1.0, tangent=True):
    """Convenience wrapper returning ``(K, R)`` in the full index space."""
    out = Assembler(problem, dofs).assemble(state, load_factor, tangent)
    return out.K, out.R


def external_force(problem, dofs):
    """Reference external force vector at load factor one (dead loads)."""
    f = np.zeros(dofs.n_u)
    mesh = problem.mesh
    kind = problem.element.displacement.basis_kind
    for bc in problem.neumann:
        ftype, faces = mesh.face_sets[bc.set_name]
        if len(faces) == 0:
            continue
        pts, w = face_rule(ftype)
        N, dN = face_basis(ftype, pts, kind)
        x = mesh.nodes[faces]                                   # (nf, n, 3)
        t1 = np.einsum("fni,qn->fqi", x, dN[:, :, 0])
        t2 = np.einsum("fni,qn->fqi", x, dN[:, :, 1])
        dA = np.linalg.norm(np.cross(t1, t2), axis=-1) * w     # (nf, nq)
        load = np.einsum("qn,fq->fn", N, dA)[:, :, None] * np.asarray(bc.traction, dtype=float)
        np.add.at(f, (3 * faces[:, :, None] + np.arange(3)).ravel(), load.ravel())
    if problem.body_force is not None:
        geom = element_geometry(problem.element, mesh.nodes[mesh.cells])
        load = np.einsum("qn,eq->en", geom.Nu, geom.dV)[:, :, None] * np.asarray(problem.body_force, dtype=float)
        np.add.at(f, dofs.ue.ravel(), load.ravel())
    return f


# --- linear solve -----------------------------------------------------------

def linear_solve(A, b, structure="symmetric_indefinite", describe=None, rtol=1e-10):
    """Sparse direct solve with a residual check.

    Symmetric matrices are first tried with a supernodal Cholesky factor
    when cvxopt is installed; a matrix that is not positive definite falls
    through.  Matrices with a nonzero diagonal then use a symmetric
    fill-reducing ordering with threshold pivoting, and all others use COLAMD
    with partial pivoting.  Up to three refinement steps are applied while
    the relative residual exceeds ``rtol``; a singular factor raises
    :class:`SolverError` naming the offending equation where it can be found.
    """
    if structure not in STRUCTURES:
        raise ConfigError(f"unknown matrix structure {structure!r}")
    A = sp.csc_matrix(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if n == 0:
        return np.zeros(0)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n)
    if structure != "unsymmetric" and _cholmod is not None and np.all(A.diagonal() > 0.0):
        x = _cholesky_solve(A, b)
        if x is not None and np.linalg.norm(b - A @ x) <= rtol * bnorm:
            return x
    attempts = []
    # a symmetric ordering suits symmetric matrices with a full diagonal; zero
    # diagonal entries (Lagrange-multiplier rows) force off-diagonal pivots
    # that ruin it, so those go straight to COLAMD with partial pivoting
    if structure != "unsymmetric" and np.all(A.diagonal() != 0.0):
        attempts.append(("MMD_AT_PLUS_A", 0.001, dict(SymmetricMode=True)))
    attempts.append(("COLAMD", 1.0, {}))
    last = None
    for permc, thresh, opts in attempts:
        try:
            lu = splu(A, permc_spec=permc, diag_pivot_thresh=thresh, options=opts)
        except RuntimeError as exc:
            last = exc
            continue
        x = lu.solve(b)
        r = b - A @ x
        for _ in range(3):
            if np.linalg.norm(r) <= rtol * bnorm:
                break
            x = x + lu.solve(r)
            r = b - A @ x
        rel = np.linalg.norm(r) / bnorm
        if np.all(np.isfinite(x)) and rel <= rtol:
            return x
        last = SolverError(f"linear solve residual {rel:.3e} exceeds {rtol:.1e}")
    raise SolverError(_singularity_message(A, describe, last))


def _cholesky_solve(A, b):
    """Cholesky solve through CHOLMOD, or None if ``A`` is not positive definite."""
    C = A.tocoo()
    M = _cvx_spmatrix(C.data.tolist(), C.row.tolist(), C.col.tolist(), C.shape)
    try:
        F = _cholmod.symbolic(M)
        _cholmod.numeric(M, F)
    except ArithmeticError:
        return None
    x = _cvx_matrix(b)
    _cholmod.solve(F, x)
    x = np.array(x).ravel()
    return x if np.all(np.isfinite(x)) else None


def _singularity_message(A, describe, exc):
    A = sp.csr_matrix(A)
    zero_rows = np.flatnonzero(np.abs(A).sum(axis=1).A1 == 0.0)
    zero_cols = np.flatnonzero(np.abs(A).sum(axis=0).A1 == 0.0)
    name = describe or (lambda i: f"equation {i}")
    if len(zero_rows):
        return f"singular system: empty row for {name(int(zero_rows[0]))}"
    if len(zero_cols):
        return f"singular system: empty column for {name(int(zero_cols[0]))}"
    msg = str(exc) if exc is not None else "factorisation failed"
    return f"singular or ill-conditioned system ({msg})"


# --- Newton-Raphson ---------------------------------------------------------

@dataclass
class ConvergenceLog:
    """Residual norms per step and iteration.  Iteration 0 is the norm of the
    residual linearised about the previous converged state with the step's
    prescribed increment applied (the predictor); later entries are the true
    mixed residual after each correction."""

    residuals: list = field(default_factory=list)    # one list of norms per step
    step_lengths: list = field(default_factory=list)  # backtracking factor per iteration
    wall_time: list = field(default_factory=list)
    converged: list = field(default_factory=list)

    def iterations(self, step):
        return len(self.residuals[step]) - 1

    @property
    def iteration_counts(self):
        return [len(r) - 1 for r in self.residuals]

    def rows(self):
        for s, norms in enumerate(self.residuals, start=1):
            for it, r in enumerate(norms):
                yield s, it, r

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "iteration", "residual_norm"])
            for s, it, r in self.rows():
                w.writerow([s, it, f"{r:.10e}"])


@dataclass
class StepResult:
    step: int
    load_factor: float
    state: SolutionState
    J: np.ndarray           # (ne, nq) at convergence
    iterations: int


class NewtonSolver:
    """Fixed-increment Newton-Raphson driver for a :class:`Problem`."""

    def __init__(self, problem, tolerances=None):
        self.problem = problem
        self.tol = tolerances or Tolerances()
        self.dofs = DofMap(problem)
        self.assembler = Assembler(problem, self.dofs)
        self.structure = problem.structure

    def _solve(self, A, b):
        if self.structure != "unsymmetric":
            asym = abs(A - A.T).max() if A.nnz else 0.0
            scale = abs(A).max() if A.nnz else 1.0
            if asym > 1e-8 * scale:
                raise SolverError(f"{self.problem.kind} tangent is not symmetric "
                                  f"(max |K - K^T| = {asym:.3e})")
        return linear_solve(A, b, self.structure, describe=self.dofs.describe)

    def _update(self, state, dx_full, asm, alpha=1.0):
        """``state += alpha * dx``; condensed unknowns are recovered from the
        full direction before scaling (the recovery is affine in ``dx``)."""
        d = self.dofs
        state.u += alpha * dx_full[: d.n_u].reshape(-1, 3)
        if d.condensed:
            di = alpha * asm.condensed.recover(dx_full[d.ue])
            nt = asm.condensed.n_theta
            if nt:
                state.theta[d.te_local.ravel()] += di[:, :nt].ravel()
            state.p[d.pe_local.ravel()] += di[:, nt:].ravel()
        else:
            state.p += alpha * dx_full[d.p_offset:d.t_offset]
            state.theta += alpha * dx_full[d.t_offset:]

    def _advance(self, state, dx, asm, lam, target, r0=None):
        """Apply the Newton correction with a step length ``alpha <= 1``.

        The step is halved while the trial state is inadmissible (inverted
        element, Gent lockup, non-positive Jbar).  When ``r0`` is given (no
        prescribed increment pending) the step must also satisfy an Armijo
        decrease of the mixed residual norm; if no halving achieves it the
        trial with the smallest residual is taken.
        """
        alpha = 1.0
        best = None
        last = None
        for _ in range(self.max_halvings):
            trial = state.copy()
            self._update(trial, dx, asm, alpha)
            if alpha == 1.0:
                trial.u.reshape(-1)[self.dofs.constrained] = target
            try:
                out = self.assembler.assemble(trial, lam)
            except ADMISSIBILITY_ERRORS as exc:
                last = exc
                alpha *= 0.5
                log.debug("inadmissible trial state (%s); step length %.4g", exc, alpha)
                continue
            if r0 is None:
                return trial, out, alpha
            r = self.assembler.mixed_residual_norm(out.R_mixed_norm_parts)
            if r <= (1.0 - 1e-4 * alpha) * r0:
                return trial, out, alpha
            if best is None or r < best[0]:
                best = (r, trial, out, alpha)
            alpha *= 0.5
        if best is not None:
            return best[1], best[2], best[3]
        raise last

    max_halvings = 12

    def _history_J(self, J):
        """Converged Jacobians the history is linearised about: point values,
        or their element volume averages broadcast to the points."""
        if self.problem.history == "point":
            return J
        dV = self.assembler.geom.dV
        avg = np.einsum("eq,eq->e", J, dV) / dV.sum(axis=1)
        return np.repeat(avg[:, None], J.shape[1], axis=1)

    def run(self, program, state=None, callback=None):
        """Solve all load steps; returns ``(list of StepResult, ConvergenceLog)``.

        A step that fails raises :class:`ConvergenceError` carrying the log;
        other solver errors are re-raised with the step and iteration added
        to the message.
        """
        pb = self.problem
        d = self.dofs
        tol = self.tol
        state = state or initial_state(pb, d)
        J_conv = np.ones((d.n_elements, len(pb.element.quadrature.weights)))
        log_ = ConvergenceLog()
        results = []
        for s, lam in enumerate(program.factors, start=1):
            t0 = time.perf_counter()
            norms = []
            log_.residuals.append(norms)
            log_.converged.append(False)
            log_.step_lengths.append([])
            it = 0
            converged = False
            try:
                if pb.kind == FormulationKind.PROPOSED_CONSISTENT:
                    state.history = update_history(pb.material.vol, self._history_J(J_conv))
                target = lam * d.constrained_values
                asm = self.assembler.assemble(state, lam)
                first = True
                while it < tol.max_iter:
                    # remaining prescribed increment is lifted into the rhs;
                    # on the first iteration this is the linearised predictor
                    dx = np.zeros(d.n_full)
                    dx[d.constrained] = target - state.u.reshape(-1)[d.constrained]
                    if first:
                        norms.append(self.lifted_norm(asm, dx[: d.n_u]))
                        first = False
                    pending = bool(np.any(dx[d.constrained] != 0.0))
                    r0 = None if pending else self.assembler.mixed_residual_norm(asm.R_mixed_norm_parts)
                    rhs = -(asm.R + asm.K @ dx)[d.free]
                    dx[d.free] = self._solve(asm.K[d.free][:, d.free], rhs)
                    state, asm, alpha = self._advance(state, dx, asm, lam, target, r0)
                    log_.step_lengths[-1].append(alpha)
                    it += 1
                    r = self.assembler.mixed_residual_norm(asm.R_mixed_norm_parts)
                    norms.append(r)
                    log.debug("step %d iteration %d residual %.6e", s, it, r)
                    if not np.isfinite(r):
                        break
                    if alpha == 1.0 and (r <= tol.tol_abs or r <= tol.tol_rel * norms[0]):
                        converged = True
                        break
            except MixfemError as exc:
                log_.wall_time.append(time.perf_counter() - t0)
                exc.step, exc.iteration = s, it + 1
                if exc.args:
                    exc.args = (f"load step {s}, iteration {it + 1}: {exc.args[0]}",) + exc.args[1:]
                raise
            log_.wall_time.append(time.perf_counter() - t0)
            if not converged:
                raise ConvergenceError(
                    f"load step {s} did not converge in {it} iterations "
                    f"(last residual {norms[-1]:.3e})", log=log_, step=s)
            log_.converged[-1] = True
            J_conv = asm.J
            res = StepResult(step=s, load_factor=float(lam), state=state.copy(), J=asm.J.copy(), iterations=it)
            results.append(res)
            if callback is not None:
                callback(res, asm)
        return results, log_

    def lifted_norm(self, asm, du):
        """Mixed residual norm with the displacement increment ``du`` lifted
        through the element blocks (free displacement rows, pressure and
        Jacobian rows)."""
        d = self.dofs
        b = asm.blocks
        du_e = du[d.ue]
        Ru, Rp, Rt = (x.copy() for x in asm.R_mixed_norm_parts)
        np.add.at(Ru, d.ue.ravel(), np.einsum("eab,eb->ea", b.Kuu, du_e).ravel())
        np.add.at(Rp, d.pe_local.ravel(), np.einsum("emb,eb->em", b.Kpu, du_e).ravel())
        if d.n_theta:
            Rt[d.te_local.ravel()] += np.einsum("emb,eb->em", b.Ktu, du_e).ravel()
        return self.assembler.mixed_residual_norm((Ru, Rp, Rt))


def newton_solve(problem, program, tolerances=None, callback=None):
    """Solve ``problem`` over ``program``; returns ``(results, ConvergenceLog)``."""
    return NewtonSolver(problem, tolerances).run(program, callback=callback)


def element_average_J(result, geom):
    """Volume-weighted element average of the Jacobian."""
    return np.einsum("eq,eq->e", result.J, geom.dV) / geom.volume

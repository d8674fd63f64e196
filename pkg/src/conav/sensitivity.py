"""Sensitivity of a lower-level optimum to the environment parameters.

At a KKT point the residual ``C(y, theta) = [grad_z L; c_E; w * c_I]`` of
:func:`conav.trajopt.nlp.kkt_residual` vanishes, with ``y = (z, lam, w)``.
Differentiating ``C(y(theta), theta) = 0`` gives::

    D_agent @ dy/dtheta + D_theta = 0

with ``D_agent = dC/dy`` (square) and ``D_theta = dC/dtheta``.

Rows and columns of ``y`` follow the solver layout: primal ``z`` (states and
controls per agent), equality multipliers (dynamics, then initial
conditions) and inequality multipliers (obstacles, agent pairs, bounds).

An interior-point solution is not an exact KKT point (``w * s ~ mu``), so it
is first *crisped*: tiny multipliers are truncated, an active set is fixed
and one Newton step on the exact KKT system restricted to that set removes
the barrier offset.  The linear solve is done on the reduced system in which
inactive multipliers are pinned to zero; the full-size residual identity is
then checked on the literal ``D_agent``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import SingularKKTError
from .trajopt.nlp import NlpProblem, NlpSolution, kkt_residual

#: multipliers below this are truncated to zero before differentiation
DUAL_TRUNCATION = 1e-6
#: |g| below this together with a truncated multiplier marks a weakly active constraint
WEAK_TOL = 1e-6
COND_LIMIT = 1e12
DAMPING_START = 1e-8
DAMPING_CAP = 1e-2
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class ActiveSet:
    """Classification of the inequality constraints at a crisped point."""

    active: np.ndarray  # indices treated as active
    weak: np.ndarray  # weakly active indices (truncated multiplier, |g| tiny)
    weak_rule: str = "inactive"
    sign_flips: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    # active by their multipliers but linearly dependent on the rest, dropped
    dependent: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def mask(self, n_in: int) -> np.ndarray:
        m = np.zeros(n_in, dtype=bool)
        m[self.active] = True
        return m

    def same_as(self, other: "ActiveSet") -> bool:
        return np.array_equal(np.sort(self.active), np.sort(other.active))


@dataclass(frozen=True)
class SensitivityResult:
    D_agent_theta: np.ndarray  # (n + n_eq + n_in, p)
    active_set: Optional[ActiveSet]
    conditioning: float
    fallback_used: bool
    damping: float = 0.0
    residual: float = float("nan")

    def primal(self, n: int) -> np.ndarray:
        return self.D_agent_theta[:n]


def _dense(a) -> np.ndarray:
    return a.toarray() if sp.issparse(a) else np.asarray(a, dtype=float)


def jacobian_wrt_theta(problem: NlpProblem, solution: NlpSolution, z=None, lam=None, w=None) -> np.ndarray:
    """``D_theta = dC/dtheta``, shape ``(n + n_eq + n_in, p)``."""
    z = solution.z if z is None else z
    lam = solution.lam if lam is None else lam
    w = solution.w if w is None else w
    parts = [_dense(problem.lagrangian_grad_theta(z, lam, w)), _dense(problem.eq_theta(z))]
    if problem.n_in:
        parts.append(np.asarray(w)[:, None] * _dense(problem.ineq_theta(z)))
    return np.vstack(parts)


def jacobian_wrt_primal_dual(problem: NlpProblem, solution: NlpSolution, z=None, lam=None, w=None) -> sp.csr_matrix:
    """``D_agent = dC/d(z, lam, w)`` as a sparse square matrix."""
    z = solution.z if z is None else z
    lam = solution.lam if lam is None else lam
    w = np.asarray(solution.w if w is None else w)
    n_in = problem.n_in
    H = sp.csr_matrix(problem.lagrangian_hessian(z, lam, w))
    JE = sp.csr_matrix(problem.eq_jac(z))
    blocks = [[H, JE.T], [JE, None]]
    if n_in:
        JI = sp.csr_matrix(problem.ineq_jac(z))
        blocks[0].append(JI.T)
        blocks[1].append(None)
        blocks.append([sp.diags(w) @ JI, None, sp.diags(problem.ineq(z))])
    n_eq = problem.n_eq
    # bmat needs at least one block per row/column to infer shapes
    blocks[1][1] = sp.csr_matrix((n_eq, n_eq))
    if n_in:
        blocks[1][2] = sp.csr_matrix((n_eq, n_in))
        blocks[2][1] = sp.csr_matrix((n_in, n_eq))
    return sp.bmat(blocks, format="csr")


def classify(problem: NlpProblem, solution: NlpSolution, z=None, w=None, weak_rule: str = "inactive") -> ActiveSet:
    """Active set from truncated multipliers; weakly active ones follow ``weak_rule``.

    A constraint is strongly active when its multiplier is at least
    :data:`DUAL_TRUNCATION` and exceeds its slack ``-g``.
    """
    if weak_rule not in ("inactive", "active"):
        raise ValueError(f"weak_rule must be 'inactive' or 'active', got {weak_rule!r}")
    z = solution.z if z is None else z
    w = np.asarray(solution.w if w is None else w)
    if not problem.n_in:
        return ActiveSet(np.zeros(0, dtype=int), np.zeros(0, dtype=int), weak_rule)
    g = problem.ineq(z)
    # an interior point has w * s ~ mu on every row; the larger of the two tells the side
    strong = (w >= DUAL_TRUNCATION) & (w > -g)
    weak = ~strong & (np.abs(g) < WEAK_TOL)
    active = strong | weak if weak_rule == "active" else strong
    return ActiveSet(np.flatnonzero(active), np.flatnonzero(weak), weak_rule)


#: relative size of a QR diagonal entry below which a constraint gradient is dependent
DEPENDENCE_TOL = 1e-8


def independent_active(problem: NlpProblem, z, active, w) -> tuple[np.ndarray, np.ndarray]:
    """Split ``active`` into a set with linearly independent gradients and the rest.

    Equality gradients come first, then active inequalities by decreasing
    multiplier; a gradient (numerically) in the span of those before it is
    dependent.  Returns ``(kept, dropped)`` as sorted index arrays.
    """
    active = np.asarray(active, dtype=int)
    if not active.size:
        return active, active
    order = active[np.argsort(-w[active], kind="stable")]
    JE = _dense(problem.eq_jac(z))
    JA = _dense(problem.ineq_jac(z))[order]
    M = np.vstack([JE, JA]).T
    _, R = sla.qr(M, mode="economic")
    diag = np.abs(np.diag(R))
    col = np.linalg.norm(M, axis=0)
    dep = diag < DEPENDENCE_TOL * np.maximum(col, 1e-300)
    dep_ineq = dep[JE.shape[0] :]
    if np.any(dep[: JE.shape[0]]):
        # dependent equalities are a modelling problem; leave them to the singularity check
        pass
    return np.sort(order[~dep_ineq]), np.sort(order[dep_ineq])


def crisp(
    problem: NlpProblem,
    solution: NlpSolution,
    weak_rule: str = "inactive",
    max_steps: int = 8,
    tol: float = 1e-12,
) -> tuple[NlpSolution, ActiveSet]:
    """Exact KKT point near an interior-point solution.

    Multipliers below :data:`DUAL_TRUNCATION` are set to zero, the active
    set is fixed, and Newton steps are taken on the system
    ``grad L = 0, c_E = 0, c_A = 0`` until its residual is below ``tol``
    (one step usually suffices; ``max_steps`` caps the loop).  Active
    multipliers that turn negative are reported in ``sign_flips`` (the
    active set is then not locally stable) but kept.  Active constraints
    whose gradients are linearly dependent on the others are dropped first
    (see :func:`independent_active`) and listed in ``dependent``.
    """
    aset = classify(problem, solution, weak_rule=weak_rule)
    n, n_eq, n_in = problem.n, problem.n_eq, problem.n_in
    A, dropped = independent_active(problem, solution.z, aset.active, solution.w)
    aset = replace(aset, active=A, dependent=dropped)
    z = np.array(solution.z, dtype=float)
    lam = np.array(solution.lam, dtype=float)
    w = np.zeros(n_in)
    w[A] = solution.w[A]
    for _ in range(max_steps):
        rhs = -np.concatenate([problem.lagrangian_grad(z, lam, w), problem.eq(z), problem.ineq(z)[A] if n_in else []])
        if np.max(np.abs(rhs)) <= tol:
            break
        H = sp.csr_matrix(problem.lagrangian_hessian(z, lam, w))
        JE = sp.csr_matrix(problem.eq_jac(z))
        JA = sp.csr_matrix(problem.ineq_jac(z))[A] if n_in else sp.csr_matrix((0, n))
        K = sp.bmat([[H, JE.T, JA.T], [JE, None, None], [JA, None, None]], format="csc") if (n_eq or A.size) else H
        K = _dense(K)
        try:
            d = sla.solve(K, rhs, assume_a="sym")
        except (sla.LinAlgError, ValueError):
            d, *_ = np.linalg.lstsq(K, rhs, rcond=None)
        z = z + d[:n]
        lam = lam + d[n : n + n_eq]
        w[A] = w[A] + d[n + n_eq :]
    s = -problem.ineq(z) if n_in else np.zeros(0)
    flips = A[w[A] < 0] if A.size else np.zeros(0, dtype=int)
    out = replace(solution, z=z, s=s, lam=lam, w=w, mu=0.0)
    return out, replace(aset, sign_flips=flips)


def _cond_estimate(lu_piv, anorm) -> float:
    lu, _ = lu_piv
    rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
    return float("inf") if rcond == 0 or info != 0 else 1.0 / rcond


def ift_solve(
    D_agent,
    D_theta,
    active: Optional[ActiveSet] = None,
    n: Optional[int] = None,
    n_eq: int = 0,
    labels: Optional[list] = None,
) -> SensitivityResult:
    """``dy/dtheta = -D_agent^{-1} D_theta`` with condition check and damping.

    Without ``active`` the full square system is solved.  With ``active``
    (and the primal/equality sizes ``n``, ``n_eq``) inactive multipliers are
    pinned to zero and the complementarity rows of active constraints are
    divided by their multipliers, which is the same solution on a much
    smaller and better scaled system.

    If the 1-norm condition estimate exceeds ``1e12`` a diagonal shift
    ``delta`` (``+delta`` on primal rows, ``-delta`` on dual rows) is tried
    from ``1e-8`` upward by factors of 10; beyond ``1e-2`` a
    :class:`SingularKKTError` names the active constraints.
    """
    D_agent = sp.csr_matrix(D_agent)
    D_theta = np.atleast_2d(np.asarray(D_theta, dtype=float))
    m = D_agent.shape[0]
    if D_agent.shape != (m, m) or D_theta.shape[0] != m:
        raise ValueError(f"inconsistent shapes {D_agent.shape} and {D_theta.shape}")
    p = D_theta.shape[1]

    if active is None:
        keep = np.arange(m)
        n_primal = m if n is None else n
        Kr = D_agent.toarray()
        Br = D_theta.copy()
        scale_rows = None
    else:
        if n is None:
            raise ValueError("n is required together with an active set")
        A = np.asarray(active.active, dtype=int)
        keep = np.concatenate([np.arange(n + n_eq), n + n_eq + A])
        n_primal = n
        Kr = D_agent[keep][:, keep].toarray()
        Br = D_theta[keep].copy()
        scale_rows = np.arange(n + n_eq, keep.size)
    if scale_rows is not None and scale_rows.size:
        # active complementarity rows are w_k * dg_k; rescale them to unit size
        rows = Kr[scale_rows, :n_primal]
        s = np.max(np.abs(rows), axis=1)
        s = np.where(s > 0, s, 1.0)
        Kr[scale_rows] /= s[:, None]
        Br[scale_rows] /= s[:, None]

    sign = np.where(np.arange(keep.size) < n_primal, 1.0, -1.0)
    damping = 0.0
    fallback = False
    while True:
        K = Kr + damping * np.diag(sign) if damping else Kr
        anorm = float(np.max(np.sum(np.abs(K), axis=0))) if K.size else 0.0
        try:
            lu_piv = sla.lu_factor(K, check_finite=True)
            cond = _cond_estimate(lu_piv, anorm) if K.size else 1.0
        except (sla.LinAlgError, ValueError):
            cond = float("inf")
        if np.isfinite(cond) and cond <= COND_LIMIT:
            break
        fallback = True
        damping = DAMPING_START if damping == 0 else damping * 10.0
        if damping > DAMPING_CAP:
            names = []
            if active is not None and labels is not None:
                names = [labels[k] for k in active.active]
            raise SingularKKTError(
                f"KKT Jacobian singular (condition estimate {cond:.3g}) after damping cap", names
            )
    Xr = -sla.lu_solve(lu_piv, Br) if K.size else np.zeros((0, p))
    X = np.zeros((m, p))
    X[keep] = Xr
    residual = float(np.max(np.abs(D_agent @ X + D_theta))) if m else 0.0
    return SensitivityResult(X, active, cond, fallback, damping, residual)


def sensitivities(problem: NlpProblem, solution: NlpSolution, weak_rule: str = "inactive") -> tuple[SensitivityResult, NlpSolution]:
    """Crisp ``solution`` and return the IFT sensitivities with the crisped point."""
    point, aset = crisp(problem, solution, weak_rule=weak_rule)
    D_agent = jacobian_wrt_primal_dual(problem, point)
    D_theta = jacobian_wrt_theta(problem, point)
    res = ift_solve(D_agent, D_theta, aset, n=problem.n, n_eq=problem.n_eq, labels=problem.ineq_labels())
    return res, point


# ------------------------------------------------------------- fd harness


@dataclass(frozen=True)
class FdRow:
    theta_index: int
    ift_norm: float
    fd_norm: float
    rel_err: float
    flag: str


@dataclass(frozen=True)
class FdReport:
    rows: tuple
    h: float

    @property
    def max_rel_err(self) -> float:
        vals = [r.rel_err for r in self.rows if r.flag == "ok"]
        return max(vals) if vals else 0.0

    @property
    def flagged(self) -> list:
        return [r.theta_index for r in self.rows if r.flag != "ok"]

    def passed(self, tol: float = 1e-3) -> bool:
        return all(r.rel_err <= tol for r in self.rows if r.flag == "ok")

    def to_text(self) -> str:
        lines = ["theta_index, ift_norm, fd_norm, rel_err, flag"]
        for r in self.rows:
            lines.append(f"{r.theta_index}, {r.ift_norm:.6e}, {r.fd_norm:.6e}, {r.rel_err:.3e}, {r.flag}")
        return "\n".join(lines)


#: columns smaller than this are compared in absolute terms; the crisped
#: points carry ~1e-12 of round-off, which a central difference with
#: h = 1e-5 amplifies to ~1e-7
FD_ABS_FLOOR = 1e-6


def _rel_err(a, b, floor=FD_ABS_FLOOR) -> float:
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), floor)) if a.size else 0.0


def fd_check(
    make_problem: Union[Callable[[np.ndarray], NlpProblem], object],
    theta,
    h: float = 1e-5,
    solve: Optional[Callable] = None,
    base: Optional[NlpSolution] = None,
    indices=None,
    weak_rule: str = "inactive",
    _tamper: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> FdReport:
    """Compare IFT primal sensitivities with central differences of re-solves.

    ``make_problem`` maps ``theta`` to an :class:`NlpProblem`; a scenario
    object (anything with ``theta0`` and ``horizon``) is accepted and turned
    into a trajectory problem.  Perturbed problems are warm started from the
    base solution and crisped like the base point.  Columns whose active set
    differs at ``theta +- h`` are flagged ``active_set_change``; columns
    where a re-solve fails are flagged ``solve_failed``.
    """
    from .trajopt import solve as ipm_solve

    if not callable(make_problem):
        from .trajopt.transcription import TrajectoryProblem

        scenario = make_problem
        make_problem = lambda th: TrajectoryProblem(scenario, th)  # noqa: E731
    solve = solve or ipm_solve
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    prob = make_problem(theta)
    sol = base if base is not None else solve(prob)
    res, point = sensitivities(prob, sol, weak_rule=weak_rule)
    aset0 = res.active_set
    dz = res.primal(prob.n)
    if _tamper is not None:
        dz = _tamper(dz.copy())
    rows = []
    for k in range(theta.size) if indices is None else indices:
        e = np.zeros(theta.size)
        e[k] = h
        pts = []
        flag = "ok"
        for sgn in (1.0, -1.0):
            pk = make_problem(theta + sgn * e)
            sk = solve(pk, init=sol)
            if not sk.converged:
                flag = "solve_failed"
                break
            ck, ak = crisp(pk, sk, weak_rule=weak_rule)
            if aset0 is not None and not ak.same_as(aset0):
                flag = "active_set_change"
            pts.append(ck.z)
        if flag == "solve_failed":
            rows.append(FdRow(k, float(np.max(np.abs(dz[:, k]))), float("nan"), float("nan"), flag))
            continue
        fd = (pts[0] - pts[1]) / (2 * h)
        col = dz[:, k]
        rows.append(FdRow(k, float(np.max(np.abs(col))), float(np.max(np.abs(fd))), _rel_err(col, fd), flag))
    return FdReport(tuple(rows), h)

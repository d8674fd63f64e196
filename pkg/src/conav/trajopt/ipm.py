"""Primal-dual interior-point solver for :class:`~conav.trajopt.nlp.NlpProblem`.

Inequalities get slacks, ``c_I(z) + s = 0`` with ``s > 0``, and a log
barrier ``-mu * sum(log s)``.  Each iteration takes a Newton step on the
perturbed KKT conditions with slacks and inequality multipliers eliminated,
so the linear system is ``[[W + J_I' S^-1 Z J_I, J_E'], [J_E, 0]]``.  The
system is factored with Bunch-Kaufman; when its inertia is wrong the solver
first swaps in the problem's convexified Hessian (if it offers one) and then
adds growing diagonal damping to the Hessian block.  Steps are limited by
the fraction-to-the-boundary rule and accepted by backtracking on an l1
exact-penalty merit function with one second-order correction.  The
barrier parameter is divided by ``mu_factor`` whenever the barrier
subproblem is solved to ``kappa_eps * mu``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla

from .nlp import IterationRecord, NlpProblem, NlpSolution


@dataclass(frozen=True)
class IpmOptions:
    tol_kkt: float = 1e-6
    tol_feas: float = 1e-8
    mu0: float = 1.0
    mu_min: float = 1e-8
    mu_factor: float = 10.0
    kappa_eps: float = 10.0
    tau: float = 0.995
    max_iter: int = 300
    armijo: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    soc: bool = True
    slack_floor: float = 1e-2
    # damping of the Hessian block
    delta_first: float = 1e-4
    delta_min: float = 1e-20
    delta_max: float = 1e40
    penalty_rho: float = 0.1
    penalty_slack: float = 10.0
    convexify: bool = True
    # barrier level used when restarting from a previous solution
    warm_mu: float = 1e-4
    warm_slack_floor: float = 1e-4
    kappa_sigma: float = 1e10



def _ftb(v, dv, tau):
    """Largest alpha in (0, 1] keeping ``v + alpha dv >= (1 - tau) v``."""
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-tau * v[neg] / dv[neg])))


class _Eval:
    """Problem evaluations at one primal point, cached."""

    def __init__(self, problem: NlpProblem, z: np.ndarray):
        self.z = z
        self.f = problem.objective(z)
        self.g = problem.objective_grad(z)
        self.cE = problem.eq(z)
        self.cI = problem.ineq(z)
        self._problem = problem
        self._JE = None
        self._JI = None

    @property
    def JE(self):
        if self._JE is None:
            self._JE = sp.csr_matrix(self._problem.eq_jac(self.z))
        return self._JE

    @property
    def JI(self):
        if self._JI is None:
            self._JI = sp.csr_matrix(self._problem.ineq_jac(self.z))
        return self._JI


def _merit(ev: _Eval, s, mu, nu):
    barrier = -mu * np.sum(np.log(s)) if len(s) else 0.0
    infeas = np.sum(np.abs(ev.cE)) + np.sum(np.abs(ev.cI + s))
    return ev.f + barrier + nu * infeas, infeas


class _State:
    def __init__(self, z, s, lam, w):
        self.z, self.s, self.lam, self.w = z, s, lam, w


def _errors(ev: _Eval, st: _State, mu: float):
    rd = ev.g.copy()
    if len(st.lam):
        rd += ev.JE.T @ st.lam
    if len(st.w):
        rd += ev.JI.T @ st.w
    dual_inf = float(np.max(np.abs(rd))) if len(rd) else 0.0
    eq_inf = float(np.max(np.abs(ev.cE))) if len(ev.cE) else 0.0
    slack_inf = float(np.max(np.abs(ev.cI + st.s))) if len(st.s) else 0.0
    viol = float(max(0.0, np.max(ev.cI))) if len(ev.cI) else 0.0
    ws = st.w * st.s
    compl0 = float(np.max(np.abs(ws))) if len(ws) else 0.0
    compl_mu = float(np.max(np.abs(ws - mu))) if len(ws) else 0.0
    return rd, dual_inf, max(eq_inf, slack_inf), viol, compl0, compl_mu


def solve(
    problem: NlpProblem,
    init: Optional[object] = None,
    options: Optional[IpmOptions] = None,
    log: Optional[Callable[[IterationRecord], None]] = None,
) -> NlpSolution:
    """Solve ``problem`` from a cold start or from ``init``.

    ``init`` may be a previous :class:`NlpSolution` (warm start: primal,
    slacks and multipliers are reused and the barrier restarts at
    ``warm_mu``) or a plain primal vector.

    Exhausting ``max_iter`` or a failed line search returns the iterate with
    the smallest KKT error and a status other than ``"converged"``.
    """
    opts = options or IpmOptions()
    t0 = time.perf_counter()
    n_eq, n_in = problem.n_eq, problem.n_in

    warm = isinstance(init, NlpSolution)
    if warm:
        z = np.array(init.z, dtype=float)
        lam = np.array(init.lam, dtype=float)
        ev = _Eval(problem, z)
        s = np.maximum(np.asarray(init.s, dtype=float), -ev.cI) if n_in else np.zeros(0)
        w = np.array(init.w, dtype=float)
        st = _State(z, s, lam, w)
        _, dual_inf, _, viol, compl0, _ = _errors(ev, st, 0.0)
        eq_inf = float(np.max(np.abs(ev.cE))) if n_eq else 0.0
        slack_inf = float(np.max(np.abs(ev.cI + st.s))) if n_in else 0.0
        if (
            dual_inf <= opts.tol_kkt
            and max(eq_inf, slack_inf, viol) <= opts.tol_feas
            and compl0 <= opts.tol_kkt
            and np.all(s > 0)
        ):
            return NlpSolution(z, s, lam, w, "converged", float(init.mu), 0, 0, time.perf_counter() - t0, ())
        mu = max(opts.mu_min, opts.warm_mu)
        s = np.maximum(s, opts.warm_slack_floor)
        w = np.maximum(w, mu / s)
    else:
        z = problem.initial_point() if init is None else np.array(init, dtype=float)
        ev = _Eval(problem, z)
        mu = opts.mu0
        s = np.maximum(-ev.cI, opts.slack_floor) if n_in else np.zeros(0)
        lam = np.zeros(n_eq)
        w = np.ones(n_in)
    st = _State(z, s, lam, w)

    nu = 1.0
    delta_last = 0.0
    records = []
    best = None
    outer = 1
    status = "max_iter"
    step_len = 0.0

    for it in range(opts.max_iter + 1):
        rd, dual_inf, primal_inf, viol, compl0, compl_mu = _errors(ev, st, mu)
        err0 = max(dual_inf, primal_inf / max(opts.tol_feas, 1e-300) * opts.tol_kkt, compl0)
        if best is None or err0 < best[0]:
            best = (err0, st.z.copy(), st.s.copy(), st.lam.copy(), st.w.copy(), mu)
        rec = IterationRecord(it, mu, float(ev.f), primal_inf, dual_inf, compl0, step_len,
                              _merit(ev, st.s, mu, nu)[0])
        records.append(rec)
        if log is not None:
            log(rec)
        if dual_inf <= opts.tol_kkt and max(primal_inf, viol) <= opts.tol_feas and compl0 <= opts.tol_kkt:
            status = "converged"
            break
        if it == opts.max_iter:
            break

        # barrier update (possibly several times in a row)
        while mu > opts.mu_min and max(dual_inf, primal_inf, compl_mu) <= opts.kappa_eps * mu:
            mu = max(opts.mu_min, mu / opts.mu_factor)
            outer += 1
            compl_mu = float(np.max(np.abs(st.w * st.s - mu))) if n_in else 0.0

        step = _newton_step(problem, ev, st, rd, mu, opts, delta_last)
        if step is None:
            status = "singular"
            break
        dz, ds, dlam, dw, K_lu, sigma, delta_w, H = step
        delta_last = delta_w

        alpha_max = _ftb(st.s, ds, opts.tau) if n_in else 1.0
        phi0, infeas0 = _merit(ev, st.s, mu, nu)
        grad_part = float(ev.g @ dz) - (mu * float(np.sum(ds / st.s)) if n_in else 0.0)
        if infeas0 > 0:
            # smallest penalty making dz a descent direction with curvature margin
            curv = max(0.0, float(dz @ (H @ dz))
                       + (float(ds @ (sigma * ds)) if n_in else 0.0))
            nu_req = (grad_part + 0.5 * curv) / ((1.0 - opts.penalty_rho) * infeas0)
            if nu_req > nu:
                nu = max(nu_req, 2.0 * nu) if nu_req > 1.5 * nu else nu_req + 1.0
            elif nu > opts.penalty_slack * max(nu_req, 1.0):
                # a stale large penalty makes the merit blind to objective progress
                nu = 2.0 * max(nu_req, 1.0)
            phi0, infeas0 = _merit(ev, st.s, mu, nu)
        dphi = grad_part - nu * infeas0

        accepted = None
        alpha = alpha_max
        first = True
        while alpha >= opts.min_step:
            z_t = st.z + alpha * dz
            s_t = st.s + alpha * ds
            ev_t = _Eval(problem, z_t)
            phi_t, _ = _merit(ev_t, s_t, mu, nu)
            if np.isfinite(phi_t) and phi_t <= phi0 + opts.armijo * alpha * min(dphi, 0.0):
                accepted = (z_t, s_t, ev_t, alpha)
                break
            if first and opts.soc and (n_eq + n_in) and alpha == alpha_max:
                soc = _second_order_correction(ev, ev_t, st, alpha, mu, sigma, K_lu, rd, problem.n, n_eq, n_in)
                if soc is not None:
                    dz_c, ds_c = soc
                    a_c = _ftb(st.s, ds_c, opts.tau) if n_in else 1.0
                    z_c = st.z + a_c * dz_c
                    s_c = st.s + a_c * ds_c
                    ev_c = _Eval(problem, z_c)
                    phi_c, _ = _merit(ev_c, s_c, mu, nu)
                    if np.isfinite(phi_c) and phi_c <= phi0 + opts.armijo * alpha * min(dphi, 0.0):
                        accepted = (z_c, s_c, ev_c, alpha)
                        break
            first = False
            alpha *= opts.backtrack

        if accepted is None:
            # fall back to a heavily damped (gradient-like) step once
            delta_last = max(delta_last * 100.0, 1.0)
            if delta_last > opts.delta_max:
                status = "line_search_failed"
                break
            step_len = 0.0
            continue

        z_t, s_t, ev_t, alpha = accepted
        alpha_d = min(alpha, _ftb(st.w, dw, opts.tau)) if n_in else 1.0
        lam_t = st.lam + alpha * dlam
        w_t = st.w + alpha_d * dw
        if n_in:
            # keep w * s within a bounded factor of mu
            w_t = np.clip(w_t, mu / (opts.kappa_sigma * s_t), opts.kappa_sigma * mu / s_t)
        st = _State(z_t, s_t, lam_t, w_t)
        ev = ev_t
        step_len = alpha

    if status != "converged" and best is not None:
        _, z, s, lam, w, mu = best
        st = _State(z, s, lam, w)
    return NlpSolution(
        st.z, st.s, st.lam, st.w, status, mu, len(records) - 1, outer, time.perf_counter() - t0, tuple(records)
    )


class _Factor:
    """Symmetric indefinite factorization (Bunch-Kaufman) with its inertia."""

    def __init__(self, K: np.ndarray):
        self.lu, self.piv, info = sla.lapack.dsytrf(K, lower=1)
        self.ok = info >= 0
        n = K.shape[0]
        d = self.lu.diagonal()
        piv = self.piv
        pos = neg = zero = 0
        k = 0
        while k < n:
            if piv[k] < 0 and k + 1 < n:
                # 2x2 pivot blocks always carry one eigenvalue of each sign
                pos += 1
                neg += 1
                k += 2
                continue
            if d[k] > 0:
                pos += 1
            elif d[k] < 0:
                neg += 1
            else:
                zero += 1
            k += 1
        self.inertia = (pos, neg, zero)

    def solve(self, b):
        x, info = sla.lapack.dsytrs(self.lu, self.piv, b, lower=1)
        return x


def _kkt_matrix(H, JE, JI, sigma, delta_w, delta_c, n, n_eq):
    K11 = H
    if JI.shape[0]:
        K11 = K11 + JI.T @ sp.diags(sigma) @ JI
    K = np.zeros((n + n_eq, n + n_eq))
    K[:n, :n] = K11.toarray() if sp.issparse(K11) else K11
    if delta_w:
        K[np.arange(n), np.arange(n)] += delta_w
    if n_eq:
        JEd = JE.toarray()
        K[n:, :n] = JEd
        K[:n, n:] = JEd.T
        if delta_c:
            K[np.arange(n, n + n_eq), np.arange(n, n + n_eq)] -= delta_c
    return K


def _newton_step(problem, ev, st, rd, mu, opts, delta_last):
    """Newton direction with inertia correction of the Hessian block."""
    n, n_eq, n_in = problem.n, problem.n_eq, problem.n_in
    H = sp.csr_matrix(problem.lagrangian_hessian(st.z, st.lam, st.w))
    sigma = st.w / st.s if n_in else np.zeros(0)
    rI = ev.cI + st.s if n_in else np.zeros(0)
    rhs1 = -rd
    if n_in:
        rhs1 = rhs1 + ev.JI.T @ (st.w - mu / st.s - sigma * rI)
    rhs = np.concatenate([rhs1, -ev.cE])

    delta_w, delta_c = 0.0, 0.0
    first = True
    convex = False
    while True:
        fac = _Factor(_kkt_matrix(H, ev.JE, ev.JI, sigma, delta_w, delta_c, n, n_eq))
        pos, neg, zero = fac.inertia
        if fac.ok and pos == n and neg == n_eq and zero == 0:
            sol = fac.solve(rhs)
            if np.all(np.isfinite(sol)):
                break
        if opts.convexify and problem.has_convexified_hessian and not convex:
            # drop the concave constraint curvature before resorting to damping
            convex = True
            H = sp.csr_matrix(problem.lagrangian_hessian(st.z, st.lam, st.w, convexify=True))
            continue
        if zero and not delta_c and n_eq:
            delta_c = 1e-8 * mu**0.25
        if first:
            first = False
            delta_w = opts.delta_first if delta_last == 0 else max(opts.delta_min, delta_last / 3)
        else:
            delta_w *= 8.0 if delta_last else 100.0
        if delta_w > opts.delta_max:
            return None
    dz = sol[:n]
    dlam = sol[n:]
    if n_in:
        ds = -rI - ev.JI @ dz
        dw = mu / st.s - st.w - sigma * ds
    else:
        ds = np.zeros(0)
        dw = np.zeros(0)
    return dz, ds, dlam, dw, fac, sigma, delta_w, H


def _second_order_correction(ev, ev_t, st, alpha, mu, sigma, lu, rd, n, n_eq, n_in):
    """Re-solve with constraint values taken at the rejected trial point."""
    cE_soc = alpha * ev.cE + ev_t.cE
    s_t = st.s + alpha * (-(ev.cI + st.s) - ev.JI @ ((ev_t.z - ev.z) / alpha)) if n_in else st.s
    rI_soc = alpha * (ev.cI + st.s) + ev_t.cI + s_t if n_in else np.zeros(0)
    rhs1 = -rd
    if n_in:
        rhs1 = rhs1 + ev.JI.T @ (st.w - mu / st.s - sigma * rI_soc)
    sol = lu.solve(np.concatenate([rhs1, -cE_soc]))
    if not np.all(np.isfinite(sol)):
        return None
    dz = sol[:n]
    ds = -rI_soc - ev.JI @ dz if n_in else np.zeros(0)
    return dz, ds

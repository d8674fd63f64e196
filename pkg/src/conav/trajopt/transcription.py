"""Direct transcription of the multi-agent navigation problem.

Decision vector, one block per agent ``i``::

    [x_i^0, ..., x_i^T, u_i^0, ..., u_i^{T-1}]

Equalities, in order: dynamics ``x_i^t - step(x_i^{t-1}, u_i^{t-1})`` for
``i`` then ``t = 1..T``; initial conditions ``x_i^0 - s_i``.

Inequalities (``<= 0``), in order: obstacle avoidance at row
``(i (T+1) + t) M + j``; agent avoidance ``D^2 - |p_i - p_j|^2`` for each
``t`` and each pair ``i < j``; finite state bounds for ``t >= 1``; finite
control bounds.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np
import scipy.sparse as sp

from ..geometry import param_slices
from .nlp import NlpProblem, NlpSolution


def _coo(rows, cols, vals, shape):
    return sp.csr_matrix((np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=shape)


def _psd_part(A):
    """Projection of a stack of symmetric 2x2 matrices onto the PSD cone."""
    vals, vecs = np.linalg.eigh(A)
    return np.einsum("kai,ki,kbi->kab", vecs, np.maximum(vals, 0.0), vecs)


def _clip_inside(v, lo, hi, frac=0.05):
    """Clip to the box shrunk by ``frac`` of its width (or of max(1, |bound|) if one-sided)."""
    both = np.isfinite(lo) & np.isfinite(hi)
    width = np.where(both, hi - lo, 0.0)
    pad_lo = np.where(both, frac * width, np.where(np.isfinite(lo), frac * np.maximum(1.0, np.abs(lo)), 0.0))
    pad_hi = np.where(both, frac * width, np.where(np.isfinite(hi), frac * np.maximum(1.0, np.abs(hi)), 0.0))
    return np.clip(v, lo + pad_lo, hi - pad_hi)


class TrajectoryProblem(NlpProblem):
    """Lower-level NLP of a scenario at fixed environment parameters."""

    has_convexified_hessian = True

    def __init__(self, scenario, theta=None, check_task: bool = True):
        self.scenario = scenario
        theta = scenario.theta0 if theta is None else np.asarray(theta, dtype=float)
        self.theta = np.atleast_1d(theta).astype(float)
        if check_task:
            scenario.audit(self.theta)
        m = scenario.dynamics
        self.model = m
        self.N = N = scenario.n_agents
        self.T = T = scenario.horizon
        self.dt = scenario.dt
        self.nx, self.nu = nx, nu = m.nx, m.nu
        self.r_a = scenario.agent_radius
        self.sep = scenario.separation
        self.obstacles = scenario.obstacles(self.theta)
        self.M = M = len(self.obstacles)
        self.slices = param_slices(self.obstacles)
        self.dP = scenario.obstacle_param_jacobian(self.theta)
        self.S, self.G = scenario.task(self.theta)
        self.dS, self.dG = scenario.task_jacobian(self.theta)
        self.n_theta = self.theta.size
        self.R1 = scenario.R1
        self.R2 = scenario.R2

        self.nb = nb = (T + 1) * nx + T * nu
        self.n = N * nb
        base = np.arange(N)[:, None] * nb
        # index tables
        self.ix = base[:, :, None] + (np.arange(T + 1)[:, None] * nx + np.arange(nx))[None]  # (N, T+1, nx)
        self.iu = base[:, :, None] + ((T + 1) * nx + np.arange(T)[:, None] * nu + np.arange(nu))[None]  # (N, T, nu)

        self.n_dyn = N * T * nx
        self.n_eq = self.n_dyn + N * nx
        self.pairs = list(combinations(range(N), 2))
        self.n_obs = N * (T + 1) * M
        self.n_pair = (T + 1) * len(self.pairs)

        # bounds: (variable index, sign, bound) with row value sign * (z - bound)
        bvar, bsign, bval = [], [], []
        for arr, lo, hi in (
            (self.ix[:, 1:, :], scenario.state_lower, scenario.state_upper),
            (self.iu, scenario.control_lower, scenario.control_upper),
        ):
            for k in range(arr.shape[-1]):
                idx = arr[..., k].ravel()
                if np.isfinite(hi[k]):
                    bvar.append(idx), bsign.append(np.ones(idx.size)), bval.append(np.full(idx.size, hi[k]))
                if np.isfinite(lo[k]):
                    bvar.append(idx), bsign.append(-np.ones(idx.size)), bval.append(np.full(idx.size, lo[k]))
        self.bvar = np.concatenate(bvar) if bvar else np.zeros(0, int)
        self.bsign = np.concatenate(bsign) if bsign else np.zeros(0)
        self.bval = np.concatenate(bval) if bval else np.zeros(0)
        self.n_bound = self.bvar.size
        self.n_in = self.n_obs + self.n_pair + self.n_bound

        self._build_static()

    # ----------------------------------------------------------- helpers
    def _build_static(self):
        N, T, nx, nu = self.N, self.T, self.nx, self.nu
        # objective Hessian is constant
        rows, cols, vals = [], [], []
        for blk, W in ((self.ix, self.R1), (self.iu, self.R2)):
            r = np.broadcast_to(blk[..., :, None], blk.shape + (blk.shape[-1],))
            c = np.broadcast_to(blk[..., None, :], blk.shape + (blk.shape[-1],))
            rows.append(r.ravel()), cols.append(c.ravel())
            vals.append(np.broadcast_to(2 * W, blk.shape[:2] + W.shape).ravel())
        self._H_obj = _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (self.n, self.n))

        # dynamics Jacobian sparsity
        xt = self.ix[:, 1:, :].reshape(N * T, nx)
        xp = self.ix[:, :-1, :].reshape(N * T, nx)
        up = self.iu.reshape(N * T, nu)
        rows = np.arange(N * T * nx).reshape(N * T, nx)
        self._dyn_rows = rows
        self._dyn_prev = np.concatenate([xp, up], axis=1)  # (N T, nx + nu)
        self._dyn_cur = xt
        self._init_rows = self.n_dyn + np.arange(N * nx).reshape(N, nx)
        self._linear_dyn = self.model.linear
        self._linear_pos = self.model.linear_position
        self._JE_const = self._eq_jac_full(None) if self._linear_dyn else None

    def split(self, z):
        z = np.asarray(z)
        return z[self.ix], z[self.iu]

    def trajectories(self, sol_or_z):
        z = sol_or_z.z if isinstance(sol_or_z, NlpSolution) else sol_or_z
        return self.split(z)

    def positions(self, sol_or_z):
        X, _ = self.trajectories(sol_or_z)
        return self.model.position(X)

    def pack(self, X, U):
        z = np.zeros(self.n)
        z[self.ix] = X
        z[self.iu] = U
        return z

    # ------------------------------------------------------- objective
    def objective(self, z):
        X, U = self.split(z)
        e = X - self.G[:, None, :]
        return float(np.einsum("itk,kl,itl->", e, self.R1, e) + np.einsum("itk,kl,itl->", U, self.R2, U))

    def objective_grad(self, z):
        X, U = self.split(z)
        g = np.zeros(self.n)
        g[self.ix] = 2 * (X - self.G[:, None, :]) @ self.R1
        g[self.iu] = 2 * U @ self.R2
        return g

    # ------------------------------------------------------ equalities
    def eq(self, z):
        X, U = self.split(z)
        nxt = self.model.step(X[:, :-1].reshape(-1, self.nx), U.reshape(-1, self.nu), self.dt)
        dyn = X[:, 1:].reshape(-1, self.nx) - nxt
        init = X[:, 0] - self.S
        return np.concatenate([dyn.ravel(), init.ravel()])

    def _eq_jac_full(self, z):
        N, T, nx, nu = self.N, self.T, self.nx, self.nu
        if z is None:
            Xp = np.zeros((N * T, nx))
            Up = np.zeros((N * T, nu))
        else:
            X, U = self.split(z)
            Xp, Up = X[:, :-1].reshape(-1, nx), U.reshape(-1, nu)
        A, B = self.model.jacobians(Xp, Up, self.dt)
        AB = -np.concatenate([A, B], axis=2)  # (NT, nx, nx+nu)
        r = self._dyn_rows
        rows = [np.broadcast_to(r[:, :, None], AB.shape).ravel(), r.ravel(), self._init_rows.ravel()]
        cols = [np.broadcast_to(self._dyn_prev[:, None, :], AB.shape).ravel(), self._dyn_cur.ravel(),
                self.ix[:, 0, :].ravel()]
        vals = [AB.ravel(), np.ones(r.size), np.ones(N * nx)]
        return _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (self.n_eq, self.n))

    def eq_jac(self, z):
        if self._JE_const is not None:
            return self._JE_const
        return self._eq_jac_full(z)

    # ---------------------------------------------------- inequalities
    def _pos(self, z):
        X, _ = self.split(z)
        flat = X.reshape(-1, self.nx)
        return flat, self.model.position(flat), self.model.position_jacobian(flat)

    def _obstacle_evals(self, P):
        return [ob.constraint(P, self.r_a) for ob in self.obstacles]

    def ineq(self, z):
        flat, P, _ = self._pos(z)
        out = np.empty(self.n_in)
        if self.M:
            g = np.stack([ce.g for ce in self._obstacle_evals(P)], axis=1)  # (N(T+1), M)
            out[: self.n_obs] = g.ravel()
        if self.pairs:
            Pa = P.reshape(self.N, self.T + 1, 2)
            ii, jj = np.array(self.pairs).T
            diff = Pa[ii] - Pa[jj]  # (npair, T+1, 2)
            g = self.sep**2 - (diff**2).sum(-1)
            out[self.n_obs : self.n_obs + self.n_pair] = g.T.ravel()
        if self.n_bound:
            zz = np.asarray(z)
            out[self.n_obs + self.n_pair :] = self.bsign * (zz[self.bvar] - self.bval)
        return out

    def ineq_jac(self, z):
        N, T, nx = self.N, self.T, self.nx
        flat, P, Jp = self._pos(z)
        rows, cols, vals = [], [], []
        xcols = self.ix.reshape(-1, nx)  # (N(T+1), nx)
        K = N * (T + 1)
        if self.M:
            for j, ce in enumerate(self._obstacle_evals(P)):
                gx = np.einsum("ka,kab->kb", ce.g_p, Jp)  # (K, nx)
                r = np.arange(K) * self.M + j
                rows.append(np.repeat(r, nx)), cols.append(xcols.ravel()), vals.append(gx.ravel())
        if self.pairs:
            Pa = P.reshape(N, T + 1, 2)
            Ja = Jp.reshape(N, T + 1, 2, nx)
            for k, (i, j) in enumerate(self.pairs):
                diff = Pa[i] - Pa[j]  # (T+1, 2)
                r = self.n_obs + np.arange(T + 1) * len(self.pairs) + k
                gi = np.einsum("ta,tab->tb", -2 * diff, Ja[i])
                gj = np.einsum("ta,tab->tb", 2 * diff, Ja[j])
                rows += [np.repeat(r, nx), np.repeat(r, nx)]
                cols += [self.ix[i].ravel(), self.ix[j].ravel()]
                vals += [gi.ravel(), gj.ravel()]
        if self.n_bound:
            rows.append(self.n_obs + self.n_pair + np.arange(self.n_bound))
            cols.append(self.bvar)
            vals.append(self.bsign)
        if not rows:
            return sp.csr_matrix((self.n_in, self.n))
        return _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (self.n_in, self.n))

    # ---------------------------------------------------- curvature
    def lagrangian_hessian(self, z, lam, w, convexify: bool = False):
        """Hessian of the Lagrangian.

        With ``convexify`` the concave curvature of the avoidance
        constraints is dropped (obstacle terms are projected onto their
        positive semidefinite part, agent-pair terms are omitted), which the
        solver uses as a cheaper cure than heavy diagonal damping.
        """
        N, T, nx, nu = self.N, self.T, self.nx, self.nu
        H = self._H_obj
        rows, cols, vals = [], [], []
        if not self._linear_dyn:
            X, U = self.split(z)
            lam_dyn = np.asarray(lam)[: self.n_dyn].reshape(N * T, nx)
            Hd = -self.model.hessian_contract(X[:, :-1].reshape(-1, nx), U.reshape(-1, nu), self.dt, lam_dyn)
            idx = self._dyn_prev
            rows.append(np.broadcast_to(idx[:, :, None], Hd.shape).ravel())
            cols.append(np.broadcast_to(idx[:, None, :], Hd.shape).ravel())
            vals.append(Hd.ravel())
        flat, P, Jp = self._pos(z)
        w = np.asarray(w)
        xcols = self.ix.reshape(-1, nx)
        K = N * (T + 1)
        Hx = np.zeros((K, nx, nx))
        if self.M:
            wo = w[: self.n_obs].reshape(K, self.M)
            for j, ce in enumerate(self._obstacle_evals(P)):
                wj = wo[:, j]
                gpp = _psd_part(ce.g_pp) if convexify else ce.g_pp
                Hx += wj[:, None, None] * np.einsum("kai,kab,kbj->kij", Jp, gpp, Jp)
                if not self._linear_pos:
                    Hx += self.model.position_hessian_contract(flat, wj[:, None] * ce.g_p)
        if self.pairs and not convexify:
            Pa = P.reshape(N, T + 1, 2)
            Ja = Jp.reshape(N, T + 1, 2, nx)
            fa = flat.reshape(N, T + 1, nx)
            Hx = Hx.reshape(N, T + 1, nx, nx)
            wp = w[self.n_obs : self.n_obs + self.n_pair].reshape(T + 1, len(self.pairs))
            for k, (i, j) in enumerate(self.pairs):
                wk = wp[:, k]
                if not np.any(wk):
                    continue
                JiJi = np.einsum("tai,taj->tij", Ja[i], Ja[i])
                JjJj = np.einsum("tai,taj->tij", Ja[j], Ja[j])
                JiJj = np.einsum("tai,taj->tij", Ja[i], Ja[j])
                Hx[i] += -2 * wk[:, None, None] * JiJi
                Hx[j] += -2 * wk[:, None, None] * JjJj
                cross = 2 * wk[:, None, None] * JiJj
                rows += [np.broadcast_to(self.ix[i][:, :, None], cross.shape).ravel(),
                         np.broadcast_to(self.ix[j][:, :, None], cross.shape).ravel()]
                cols += [np.broadcast_to(self.ix[j][:, None, :], cross.shape).ravel(),
                         np.broadcast_to(self.ix[i][:, None, :], cross.shape).ravel()]
                vals += [cross.ravel(), np.transpose(cross, (0, 2, 1)).ravel()]
                if not self._linear_pos:
                    diff = Pa[i] - Pa[j]
                    Hx[i] += self.model.position_hessian_contract(fa[i], -2 * wk[:, None] * diff)
                    Hx[j] += self.model.position_hessian_contract(fa[j], 2 * wk[:, None] * diff)
            Hx = Hx.reshape(K, nx, nx)
        if self.M or self.pairs:
            rows.append(np.broadcast_to(xcols[:, :, None], Hx.shape).ravel())
            cols.append(np.broadcast_to(xcols[:, None, :], Hx.shape).ravel())
            vals.append(Hx.ravel())
        if rows:
            H = H + _coo(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (self.n, self.n))
        return H

    # ------------------------------------------------ theta derivatives
    def lagrangian_grad_theta(self, z, lam, w):
        N, T, nx = self.N, self.T, self.nx
        p = self.n_theta
        out = np.zeros((self.n, p))
        # goals: d/dtheta of 2 R1 (x - g)
        if np.any(self.dG):
            gterm = -2 * np.einsum("kl,ilp->ikp", self.R1, self.dG)  # (N, nx, p)
            out[self.ix.reshape(N, -1)] += np.tile(gterm, (1, T + 1, 1))
        if self.M:
            flat, P, Jp = self._pos(z)
            K = N * (T + 1)
            wo = np.asarray(w)[: self.n_obs].reshape(K, self.M)
            acc = np.zeros((K, nx, p))
            for j, ce in enumerate(self._obstacle_evals(P)):
                dPj = self.dP[self.slices[j]]  # (nq, p)
                gpt = np.einsum("kaq,qp->kap", ce.g_pq, dPj)  # (K, 2, p)
                acc += wo[:, j, None, None] * np.einsum("kai,kap->kip", Jp, gpt)
            out[self.ix.reshape(-1)] += acc.reshape(K * nx, p)
        return out

    def eq_theta(self, z):
        out = np.zeros((self.n_eq, self.n_theta))
        out[self.n_dyn :] = -self.dS.reshape(self.N * self.nx, self.n_theta)
        return out

    def ineq_theta(self, z):
        out = np.zeros((self.n_in, self.n_theta))
        if self.M:
            _, P, _ = self._pos(z)
            K = self.N * (self.T + 1)
            blk = np.zeros((K, self.M, self.n_theta))
            for j, ce in enumerate(self._obstacle_evals(P)):
                blk[:, j] = ce.g_q @ self.dP[self.slices[j]]
            out[: self.n_obs] = blk.reshape(K * self.M, self.n_theta)
        return out

    # --------------------------------------------------- bookkeeping
    def ineq_labels(self):
        labels = []
        for i in range(self.N):
            for t in range(self.T + 1):
                for j in range(self.M):
                    labels.append(f"obstacle j={j} agent i={i} t={t}")
        for t in range(self.T + 1):
            for i, j in self.pairs:
                labels.append(f"pair ({i},{j}) t={t}")
        for v, s in zip(self.bvar, self.bsign):
            labels.append(f"{'upper' if s > 0 else 'lower'} bound z[{v}]")
        return labels

    def split_duals(self, sol: NlpSolution) -> dict:
        N, T, nx = self.N, self.T, self.nx
        o, p = self.n_obs, self.n_pair
        return {
            "lambda": sol.lam[: self.n_dyn].reshape(N, T, nx),
            "xi": sol.lam[self.n_dyn :].reshape(N, nx),
            "beta": sol.w[:o].reshape(N, T + 1, self.M),
            "alpha": sol.w[o : o + p].reshape(T + 1, len(self.pairs)),
            "nu": sol.w[o + p :],
        }

    def initial_point(self, margin: float = 0.2, max_move: float = 0.5, smooth_rounds: int = 30, bulge=None):
        """Straight-line states, zero controls, pushed out of obstacles.

        With ``init_via`` set on the scenario the lines are replaced by
        polylines through those waypoints, spaced evenly by arc length.
        ``init_bulge`` bends the straight lines sideways (left of the travel
        direction) by a sine profile, which breaks the symmetry of tasks
        where all straight lines meet in one point.
        """
        N, T, nx = self.N, self.T, self.nx
        s = np.linspace(0.0, 1.0, T + 1)
        X = self.S[:, None, :] + s[None, :, None] * (self.G - self.S)[:, None, :]
        via = self.scenario.via_points(self.theta)
        if via is not None:
            X = self._shift_positions(X, self._polyline_positions(via, s) - self.model.position(X))
        bulge = self.scenario.init_bulge if bulge is None else bulge
        if bulge:
            left = self._left_normals()
            off = bulge * np.sin(np.pi * s)[None, :, None] * left[:, None, :]
            X = self._shift_positions(X, off)
        X[:, 0] = self.S
        # alternate elastic smoothing of the path with push-out passes
        for k in range(smooth_rounds + 50):
            if 0 < k <= smooth_rounds:
                P = self.model.position(X)
                lap = np.zeros_like(P)
                lap[:, 1:-1] = 0.25 * (P[:, :-2] + P[:, 2:] - 2 * P[:, 1:-1])
                X = self._shift_positions(X, lap)
            moved = self._push_out(X, margin, max_move)
            moved = self._separate_agents(X, margin) or moved
            if not moved and k >= smooth_rounds:
                break
        X, U = self._fill_rates(X)
        return self.pack(X, U)

    def _polyline_positions(self, via, s):
        ps, pg = self.model.position(self.S), self.model.position(self.G)
        out = np.empty((self.N, s.size, 2))
        for i in range(self.N):
            pts = np.vstack([ps[i], via[i], pg[i]])
            seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            cum = np.concatenate([[0.0], np.cumsum(seg)])
            u = s * cum[-1]
            out[i, :, 0] = np.interp(u, cum, pts[:, 0])
            out[i, :, 1] = np.interp(u, cum, pts[:, 1])
        return out

    def _push_out(self, X, margin, max_move):
        """One Newton pass moving states out of obstacles, in place."""
        N, T, nx = self.N, self.T, self.nx
        flat = X.reshape(-1, nx)
        moved = False
        for ob in self.obstacles:
            ce = ob.constraint(self.model.position(flat), self.r_a)
            # first-order margin in distance units
            target = -margin * np.linalg.norm(ce.g_p, axis=1)
            bad = ce.g > target
            bad.reshape(N, T + 1)[:, 0] = False
            if not np.any(bad):
                continue
            Jp = self.model.position_jacobian(flat[bad])
            gx = np.einsum("ka,kab->kb", ce.g_p[bad], Jp)
            nn = np.einsum("kb,kb->k", gx, gx)
            ok = nn > 1e-6
            idx = np.flatnonzero(bad)[ok]
            # Newton step on g, at most max_move in state norm per pass
            step = (ce.g[bad][ok] - target[bad][ok]) / nn[ok]
            step = np.minimum(step, max_move / np.sqrt(nn[ok]))
            flat[idx] -= step[:, None] * gx[ok]
            stuck = np.flatnonzero(bad)[~ok]
            if stuck.size:
                # zero constraint gradient (e.g. at a circle center): nudge sideways
                flat[stuck] = self._nudge(flat[stuck], stuck // (T + 1))
            moved = True
        X[...] = flat.reshape(X.shape)
        return moved

    def _fill_rates(self, X):
        """Finite-difference rates and controls along a position path.

        Velocity-like states and controls are made roughly consistent with
        the path so the first Newton steps do not have to fix gross dynamics
        residuals.  Values are clipped to their bounds.
        """
        sc = self.scenario
        dt = self.dt
        X = X.copy()
        name = self.model.name
        if name == "unicycle":
            d = np.diff(X[:, :, 0:2], axis=1)
            step = np.linalg.norm(d, axis=-1)
            heading = np.arctan2(d[..., 1], d[..., 0])
            heading = np.where(step > 1e-9, heading, X[:, :-1, 2])
            heading = np.unwrap(np.concatenate([X[:, :1, 2], heading], axis=1), axis=1)[:, 1:]
            X[:, 1:-1, 2] = heading[:, 1:]
            X[:, 1:-1, 3] = step[:, 1:] / dt
            rates = np.stack([np.diff(X[:, :, 3], axis=1), np.diff(X[:, :, 2], axis=1)], axis=-1) / dt
        else:
            # double integrator and polar model: state = (q, dq/dt)
            X[:, 1:-1, 2:4] = (X[:, 2:, 0:2] - X[:, 1:-1, 0:2]) / dt
            rates = np.diff(X[:, :, 2:4], axis=1) / dt
        X[:, 1:] = _clip_inside(X[:, 1:], sc.state_lower, sc.state_upper)
        U = _clip_inside(rates, sc.control_lower, sc.control_upper)
        return X, U

    def _left_normals(self):
        ps, pg = self.model.position(self.S), self.model.position(self.G)
        d = pg - ps
        nrm = np.linalg.norm(d, axis=1, keepdims=True)
        left = np.stack([-d[:, 1], d[:, 0]], axis=1)
        return np.where(nrm > 0, left / np.where(nrm > 0, nrm, 1.0), np.array([0.0, 1.0]))

    def _nudge(self, states, agents, size=1e-2):
        off = size * self._left_normals()[agents]
        return self._shift_positions(states[None], off[None])[0]

    def _separate_agents(self, X, margin):
        """Move agent pairs closer than the separation apart, in place."""
        if self.N < 2:
            return False
        P = self.model.position(X)
        need = self.sep * (1.0 + margin) + margin
        off = np.zeros_like(P)
        for i, j in self.pairs:
            diff = P[i, 1:] - P[j, 1:]
            dist = np.linalg.norm(diff, axis=1)
            close = np.flatnonzero(dist < need)
            if not close.size:
                continue
            unit = np.empty((close.size, 2))
            far = dist[close] > 1e-9
            unit[far] = diff[close[far]] / dist[close[far], None]
            # coincident agents: split them across the travel direction of i
            travel = P[i, -1] - P[i, 0]
            left = np.array([-travel[1], travel[0]])
            nl = np.linalg.norm(left)
            unit[~far] = left / nl if nl > 0 else np.array([0.0, 1.0])
            push = 0.5 * (need - dist[close]) + 1e-9
            off[i, close + 1] += push[:, None] * unit
            off[j, close + 1] -= push[:, None] * unit
        if not np.any(off):
            return False
        X[...] = self._shift_positions(X, off)
        return True

    def _shift_positions(self, X, off):
        if self.model.name == "polar_double_integrator":
            P = self.model.position(X) + off
            X = X.copy()
            phi = np.arctan2(P[..., 1], P[..., 0])
            # keep the angle on the branch of the unshifted state
            phi += 2 * np.pi * np.round((X[..., 1] - phi) / (2 * np.pi))
            X[..., 0] = np.hypot(P[..., 0], P[..., 1])
            X[..., 1] = phi
            return X
        X = X.copy()
        X[..., 0:2] += off
        return X

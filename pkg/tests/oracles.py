"""Brute-force reference implementations, written with plain loops and math.

They share no code with the package so that agreement is evidence, not
tautology.
"""
import math

import numpy as np


def _norm_term(d, w, eps, tau):
    d = max(d, -eps + 1e-6)
    if d > tau:
        return 0.0
    return min(1.0, (w / (d + eps)) / (w / eps))


def unsafety_masses(P, circles, r_a, w=1.0, eps=0.1, tau=2.5):
    """``(p_obs, p_agents, F)`` for positions ``P[i][t] = (x, y)`` and circles ``(cx, cy, r)``."""
    N = len(P)
    T1 = len(P[0]) if N else 0
    M = len(circles)
    per_obs, per_pair = [], []
    for i in range(N):
        acc = 0.0
        for t in range(T1):
            for cx, cy, r in circles:
                d = math.hypot(P[i][t][0] - cx, P[i][t][1] - cy) - r - r_a
                acc += _norm_term(d, w, eps, tau)
        per_obs.append(acc / (M * T1) if M else 0.0)
        acc = 0.0
        for k in range(N):
            if k == i:
                continue
            for t in range(T1):
                d = math.hypot(P[i][t][0] - P[k][t][0], P[i][t][1] - P[k][t][1]) - 2 * r_a
                acc += _norm_term(d, w, eps, tau)
        per_pair.append(acc / ((N - 1) * T1) if N > 1 else 0.0)
    p_obs = sum(per_obs) / N if (N and M) else 0.0
    p_ag = sum(per_pair) / N if N > 1 else 0.0
    k = max(N - 1, 0)
    S = (1 - p_obs) * M + (1 - p_ag) * k
    F = S / (M + k) if M + k else 1.0
    return p_obs, p_ag, F


def collisions(P, circles, r_a, tol=-1e-6):
    """Per-agent count of maximal runs of overlap with each circle and each other agent."""
    N = len(P)
    T1 = len(P[0])
    out = []
    for i in range(N):
        count = 0
        others = [("c", c) for c in circles] + [("a", k) for k in range(N) if k != i]
        for kind, obj in others:
            inside = False
            for t in range(T1):
                if kind == "c":
                    d = math.hypot(P[i][t][0] - obj[0], P[i][t][1] - obj[1]) - obj[2] - r_a
                else:
                    d = math.hypot(P[i][t][0] - P[obj][t][0], P[i][t][1] - P[obj][t][1]) - 2 * r_a
                now = d < tol
                if now and not inside:
                    count += 1
                inside = now
        out.append(count)
    return out


def spl(P, starts, goals, circles, r_a, goal_tol=0.1):
    coll = collisions(P, circles, r_a)
    total = 0.0
    for i in range(len(P)):
        L = 0.0
        for t in range(1, len(P[i])):
            L += math.hypot(P[i][t][0] - P[i][t - 1][0], P[i][t][1] - P[i][t - 1][1])
        ell = math.hypot(goals[i][0] - starts[i][0], goals[i][1] - starts[i][1])
        ok = math.hypot(P[i][-1][0] - goals[i][0], P[i][-1][1] - goals[i][1]) <= goal_tol and coll[i] == 0
        denom = max(L, ell)
        total += (ell / denom if denom > 0 else 1.0) if ok else 0.0
    return total / len(P)


def pct_speed(V, vmax):
    """Mean of |v| over agents and steps for velocity rows ``V[i][t] = (vx, vy)``."""
    s, n = 0.0, 0
    for row in V:
        for vx, vy in row:
            s += math.hypot(vx, vy)
            n += 1
    return s / n / vmax


def lq_objective(X, U, G, R1, R2):
    """Sum over agents and steps of (x - g)' R1 (x - g) + u' R2 u with explicit loops."""
    total = 0.0
    for i in range(len(X)):
        for t in range(len(X[i])):
            e = [X[i][t][k] - G[i][k] for k in range(len(G[i]))]
            total += sum(e[a] * R1[a][b] * e[b] for a in range(len(e)) for b in range(len(e)))
        for t in range(len(U[i])):
            u = U[i][t]
            total += sum(u[a] * R2[a][b] * u[b] for a in range(len(u)) for b in range(len(u)))
    return total


def lq_kkt(s, g, T, dt, R1, R2):
    """Dense ``(H, c, E, e)`` of the single-agent double-integrator QP.

    Layout: states ``x_0..x_T`` then controls ``u_0..u_{T-1}``; equality rows
    are ``x_{t+1} - A x_t - B u_t`` followed by ``x_0 - s``.  The ZOH matrices
    are written out by hand.
    """
    A = np.eye(4)
    A[0, 2] = A[1, 3] = dt
    B = np.zeros((4, 2))
    B[0, 0] = B[1, 1] = dt * dt / 2
    B[2, 0] = B[3, 1] = dt
    nx, nu = 4, 2
    n = (T + 1) * nx + T * nu
    xi = lambda t: slice(t * nx, (t + 1) * nx)  # noqa: E731
    ui = lambda t: slice((T + 1) * nx + t * nu, (T + 1) * nx + (t + 1) * nu)  # noqa: E731
    H = np.zeros((n, n))
    c = np.zeros(n)
    for t in range(T + 1):
        H[xi(t), xi(t)] = 2 * R1
        c[xi(t)] = -2 * R1 @ g
    for t in range(T):
        H[ui(t), ui(t)] = 2 * R2
    E = np.zeros(((T + 1) * nx, n))
    e = np.zeros((T + 1) * nx)
    for t in range(T):
        r = slice(t * nx, (t + 1) * nx)
        E[r, xi(t + 1)] = np.eye(nx)
        E[r, xi(t)] = -A
        E[r, ui(t)] = -B
    E[T * nx :, xi(0)] = np.eye(nx)
    e[T * nx :] = s
    return H, c, E, e


def lq_solution(s, g, T, dt, R1, R2):
    """Optimal ``(X, U)`` of :func:`lq_kkt` from one dense linear solve."""
    H, c, E, e = lq_kkt(s, g, T, dt, R1, R2)
    n = H.shape[0]
    K = np.block([[H, E.T], [E, np.zeros((E.shape[0], E.shape[0]))]])
    z = np.linalg.solve(K, np.concatenate([-c, e]))[:n]
    X = z[: (T + 1) * 4].reshape(T + 1, 4)
    U = z[(T + 1) * 4 :].reshape(T, 2)
    return X, U

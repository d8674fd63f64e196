"""Independent feasibility audit of a lower-level solution.

Every constraint is re-evaluated point by point from the scenario, without
the vectorized index tables of :mod:`conav.trajopt.transcription`, so a
layout bug there cannot hide itself.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AuditReport:
    dynamics: float  # max |x^t - step(x^{t-1}, u^{t-1})|
    initial: float  # max |x^0 - s|
    obstacle: float  # max obstacle constraint value (<= 0 is feasible)
    pair: float  # max agent-pair constraint value
    bounds: float  # max bound violation
    tol_eq: float
    tol_in: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_text(self) -> str:
        lines = [
            f"dynamics = {self.dynamics:.3e}",
            f"initial = {self.initial:.3e}",
            f"obstacle = {self.obstacle:.3e}",
            f"pair = {self.pair:.3e}",
            f"bounds = {self.bounds:.3e}",
            f"passed = {self.passed}",
        ]
        lines += [f"violation: {v}" for v in self.violations]
        return "\n".join(lines)


def audit_solution(scenario, theta, X, U, tol_eq: float = 1e-8, tol_in: float = 1e-8) -> AuditReport:
    """Re-check dynamics, initial conditions, obstacles, pairs and bounds.

    ``X`` has shape ``(N, T + 1, nx)`` and ``U`` shape ``(N, T, nu)``.
    """
    m = scenario.dynamics
    X = np.asarray(X, dtype=float)
    U = np.asarray(U, dtype=float)
    S, _ = scenario.task(theta)
    obstacles = scenario.obstacles(theta)
    N, T1, _ = X.shape
    viol = []

    dyn = 0.0
    for i in range(N):
        for t in range(1, T1):
            r = float(np.max(np.abs(X[i, t] - m.step(X[i, t - 1], U[i, t - 1], scenario.dt))))
            dyn = max(dyn, r)
            if r > tol_eq:
                viol.append(f"dynamics agent {i} t={t}: {r:.3e}")

    init = 0.0
    for i in range(N):
        r = float(np.max(np.abs(X[i, 0] - S[i])))
        init = max(init, r)
        if r > tol_eq:
            viol.append(f"initial condition agent {i}: {r:.3e}")

    obs = -np.inf
    for i in range(N):
        for t in range(T1):
            p = m.position(X[i, t])
            for j, ob in enumerate(obstacles):
                g = float(np.ravel(ob.constraint(p, scenario.agent_radius).g)[0])
                obs = max(obs, g)
                if g > tol_in:
                    viol.append(f"obstacle {j} agent {i} t={t}: g = {g:.3e}")

    pair = -np.inf
    sep = scenario.separation
    for t in range(T1):
        for i in range(N):
            for k in range(i + 1, N):
                pi, pk = m.position(X[i, t]), m.position(X[k, t])
                g = sep**2 - float((pi[0] - pk[0]) ** 2 + (pi[1] - pk[1]) ** 2)
                pair = max(pair, g)
                if g > tol_in:
                    viol.append(f"agents {i},{k} t={t}: g = {g:.3e}")

    bnd = 0.0
    for arr, lo, hi, label in (
        (X[:, 1:], scenario.state_lower, scenario.state_upper, "state"),
        (U, scenario.control_lower, scenario.control_upper, "control"),
    ):
        for i in range(arr.shape[0]):
            for t in range(arr.shape[1]):
                for k in range(arr.shape[2]):
                    v = arr[i, t, k]
                    over = max(v - hi[k], lo[k] - v, 0.0)
                    bnd = max(bnd, over)
                    if over > tol_in:
                        viol.append(f"{label} bound agent {i} t={t} k={k}: {over:.3e}")

    return AuditReport(
        dyn, init, float(obs) if N else 0.0, float(pair) if N > 1 else 0.0, bnd, tol_eq, tol_in, viol
    )

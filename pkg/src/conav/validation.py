"""Named numerical checks behind ``co-nav validate``.

Each check returns a :class:`Check`; a run passes when every check does.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .safety import are_disjoint, union_residuals, unsafety_mass

ADDITIVITY_TOL = 1e-12
SUBADDITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tol: float
    detail: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: value = {self.value:.3e}, tol = {self.tol:.1e}{' (' + self.detail + ')' if self.detail else ''}"


def random_parts(rng, workspace, n_parts: int, max_agents: int = 3, max_steps: int = 6, disjoint: bool = False, tau: float = 2.5):
    """Random systems on a common time grid.

    With ``disjoint`` each system lives in its own vertical band, bands
    separated by more than ``tau`` plus two agent diameters, so no
    collision zone crosses systems.
    """
    x0, x1, y0, y1 = workspace
    t1 = int(rng.integers(2, max_steps + 1))
    parts = []
    for k in range(n_parts):
        n = int(rng.integers(0 if not disjoint else 1, max_agents + 1))
        if disjoint:
            width = (x1 - x0) / n_parts
            gap = tau + 1.5
            lo, hi = x0 + k * width + gap / 2, x0 + (k + 1) * width - gap / 2
            if hi <= lo:
                # band too thin for the gap: stretch the layout beyond the workspace
                lo, hi = x0 + k * (gap + 1.0), x0 + k * (gap + 1.0) + 1.0
            xs = rng.uniform(lo, hi, size=(n, t1))
        else:
            xs = rng.uniform(x0, x1, size=(n, t1))
        ys = rng.uniform(y0, y1, size=(n, t1))
        parts.append(np.stack([xs, ys], axis=-1))
    return parts


def property_suite(obstacles, params, agent_radius: float, workspace, n_systems: int = 1000, seed: int = 0) -> list:
    """Non-negativity, disjoint additivity and subadditivity on random systems."""
    rng = np.random.default_rng(seed)
    worst_neg, worst_add, worst_sub = 0.0, 0.0, 0.0
    n_disjoint = 0
    for s in range(n_systems):
        K = int(rng.integers(1, 4))
        disjoint = bool(s % 2)
        parts = random_parts(rng, workspace, K, disjoint=disjoint, tau=params.tau)
        for A in parts:
            worst_neg = min(worst_neg, unsafety_mass(A, obstacles, params, agent_radius))
        lhs, rhs = union_residuals(parts, obstacles, params, agent_radius)
        worst_sub = max(worst_sub, rhs - lhs)
        if are_disjoint(parts, params, agent_radius):
            n_disjoint += 1
            worst_add = max(worst_add, abs(lhs - rhs))
    return [
        Check("unsafety_nonnegative", worst_neg >= 0.0, (-worst_neg if worst_neg < 0 else 0.0), 0.0, f"{n_systems} systems"),
        Check("disjoint_additivity", worst_add <= ADDITIVITY_TOL and n_disjoint > 0, worst_add, ADDITIVITY_TOL, f"{n_disjoint} disjoint collections"),
        Check("subadditivity", worst_sub <= SUBADDITIVITY_TOL, max(worst_sub, 0.0), SUBADDITIVITY_TOL, f"{n_systems} collections"),
    ]


def gradient_checks(scenario, h: float = 1e-5, tol: float = 1e-3, tamper: bool = False, options=None) -> tuple[list, str]:
    """IFT primal sensitivities and the upper gradient against re-solve differences.

    Probes whose active set changes are reported but do not fail a check.
    ``tamper`` scales the analytic quantities by 1.01 to show that the
    checks can fail.  Returns the checks and a text table of all probes.
    """
    from .bilevel import upper_fd_check
    from .sensitivity import fd_check
    from .trajopt import TrajectoryProblem, solve

    corrupt = (lambda a: a * 1.01) if tamper else None
    theta = scenario.theta0
    prob = TrajectoryProblem(scenario, theta)
    base = solve(prob, options=options)
    if not base.converged:
        return [Check("lower_level_solve", False, float("nan"), 0.0, base.status)], ""
    rep = fd_check(
        lambda th: TrajectoryProblem(scenario, th, check_task=False),
        theta,
        h=h,
        solve=lambda p, init=None: solve(p, init=init, options=options),
        base=base,
        _tamper=corrupt,
    )
    up = upper_fd_check(scenario, theta, h=h, options=options, _tamper=corrupt)
    checks = [
        Check("ift_sensitivity_fd", rep.passed(tol), rep.max_rel_err, tol, f"flagged {rep.flagged}"),
        Check("upper_gradient_fd", up.passed(tol), up.max_rel_err, tol, f"flagged {up.flagged}"),
    ]
    table = "[ift_sensitivity_fd]\n" + rep.to_text() + "\n\n[upper_gradient_fd]\n" + up.to_text() + "\n"
    return checks, table

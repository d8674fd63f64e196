"""Lower-level trajectory optimization: transcription, solver and checks."""
from __future__ import annotations

from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .audit import AuditReport, audit_solution
from .ipm import IpmOptions
from .ipm import solve as ipm_solve
from .nlp import LOG_HEADER, NlpProblem, NlpSolution, kkt_residual, objective
from .transcription import TrajectoryProblem

__all__ = [
    "AuditReport",
    "IpmOptions",
    "LOG_HEADER",
    "NlpProblem",
    "NlpSolution",
    "TrajectoryProblem",
    "assemble",
    "audit",
    "audit_solution",
    "kkt_norm",
    "kkt_residual",
    "objective",
    "solve",
]

#: sideways bends of the initial guess tried, in order, after a failed cold solve
RETRY_BULGES = (1.0, -1.0, 2.0, -2.0)


def assemble(scenario, theta=None) -> TrajectoryProblem:
    """Lower-level NLP of ``scenario`` at ``theta`` (default: its ``theta0``)."""
    return TrajectoryProblem(scenario, theta)


def solve(
    problem: NlpProblem,
    init=None,
    options: Optional[IpmOptions] = None,
    log=None,
    retry_bulges: Sequence[float] = RETRY_BULGES,
) -> NlpSolution:
    """Interior-point solve with a fallback for failed starts.

    A warm start that fails is repeated from the cold initial point; a cold
    start that fails on a trajectory problem is repeated from initial
    guesses bent sideways by ``retry_bulges``.  The first converged result
    is returned; if none converges, the first attempt is returned with its
    non-converged status.
    """
    first = ipm_solve(problem, init, options, log)
    if first.converged:
        return first
    starts = []
    if init is not None:
        starts.append(None)
    if isinstance(problem, TrajectoryProblem):
        starts += [problem.initial_point(bulge=b) for b in retry_bulges]
    wall = first.wall_time
    for z0 in starts:
        sol = ipm_solve(problem, z0, options, log)
        wall += sol.wall_time
        if sol.converged:
            return _with_wall(sol, wall)
    return _with_wall(first, wall)


def _with_wall(sol: NlpSolution, wall: float) -> NlpSolution:
    return replace(sol, wall_time=wall)


def audit(problem: TrajectoryProblem, sol: NlpSolution, tol_eq: float = 1e-8, tol_in: float = 1e-8) -> AuditReport:
    X, U = problem.trajectories(sol)
    return audit_solution(problem.scenario, problem.theta, X, U, tol_eq, tol_in)


def kkt_norm(problem: NlpProblem, sol: NlpSolution) -> float:
    r = kkt_residual(problem, sol)
    return float(np.max(np.abs(r))) if r.size else 0.0

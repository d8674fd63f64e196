"""Environment co-optimization: lower-level solves, sensitivities and gradient ascent.

Each iteration solves the trajectory problem at the current environment
parameters (warm started from the previous solution), differentiates the
optimum with :mod:`conav.sensitivity`, chains that with the gradient of the
safety metric and takes one projected ascent step.  A step that lowers the
metric, leaves the admissible set or breaks the lower-level solve is halved
until it works or the step floor is reached.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, InfeasibleTaskError, SingularKKTError
from .safety import SafetyReport, evaluate, grad_F
from .sensitivity import FdReport, FdRow, _rel_err, crisp, sensitivities
from .trajopt import IpmOptions, NlpSolution, TrajectoryProblem, solve


@dataclass(frozen=True)
class BilevelConfig:
    step_size: float = 0.1
    max_iter: int = 50
    backtrack: float = 0.5
    step_floor: float = 1e-4
    backtracking: bool = True
    grad_tol: float = 1e-5
    f_tol: float = 1e-6
    f_window: int = 5
    constraint_mode: str = "project"
    batch_size: int = 1
    seed: int = 0
    weak_rule: str = "inactive"
    solver: IpmOptions = field(default_factory=IpmOptions)

    def __post_init__(self):
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0 < self.backtrack < 1:
            raise ConfigError("backtrack factor must lie in (0, 1)")
        if self.constraint_mode != "project":
            raise ConfigError(f"unsupported constraint mode {self.constraint_mode!r}")


@dataclass(frozen=True)
class IterRecord:
    kappa: int
    theta: np.ndarray
    F: float
    grad_norm: float
    step: float
    status: str
    lower_status: str
    lower_iterations: int
    safety: Optional[SafetyReport] = None
    n_tasks: int = 1
    dropped: int = 0
    solve_time: float = float("nan")

    def line(self) -> str:
        return f"{self.kappa}, {self.F:.12e}, {self.grad_norm:.6e}, {self.step:.6e}, {self.status}"


TRACE_HEADER = "kappa, F, grad_norm, step, status"


@dataclass
class BilevelTrace:
    records: list = field(default_factory=list)
    status: str = "running"
    theta0: Optional[np.ndarray] = None
    solve_times: list = field(default_factory=list)

    def append(self, rec: IterRecord):
        self.records.append(rec)

    @property
    def F_values(self) -> np.ndarray:
        return np.array([r.F for r in self.records])

    def to_text(self) -> str:
        lines = [TRACE_HEADER] + [r.line() for r in self.records]
        lines.append("")
        lines.append("[summary]")
        lines.append(f"status = {self.status}")
        lines.append(f"iterations = {len(self.records)}")
        if self.records:
            first, last = self.records[0], self.records[-1]
            lines.append(f"F_initial = {first.F:.12e}")
            lines.append(f"F_final = {last.F:.12e}")
            lines.append("theta_initial = " + " ".join(f"{v:.12e}" for v in first.theta))
            lines.append("theta_final = " + " ".join(f"{v:.12e}" for v in last.theta))
        return "\n".join(lines) + "\n"


# ------------------------------------------------------------ single task


def _positions(problem: TrajectoryProblem, z) -> np.ndarray:
    return problem.model.position(problem.split(z)[0])


def safety_report(problem: TrajectoryProblem, z) -> SafetyReport:
    sc = problem.scenario
    return evaluate(_positions(problem, z), problem.obstacles, sc.safety, sc.agent_radius, sc.R)


def metric_value(problem: TrajectoryProblem, sol: NlpSolution, weak_rule: str = "inactive") -> float:
    """F at the crisped version of ``sol`` (the point the gradient refers to)."""
    point, _ = crisp(problem, sol, weak_rule=weak_rule)
    return safety_report(problem, point.z).F


def upper_gradient(problem: TrajectoryProblem, sol: NlpSolution, weak_rule: str = "inactive"):
    """``(F, dF/dtheta, report)`` at a converged lower-level solution.

    The metric depends on theta through the trajectories (IFT sensitivity of
    the primal variables, chained through the position map) and directly
    through the obstacle parameters.
    """
    sc = problem.scenario
    res, point = sensitivities(problem, sol, weak_rule=weak_rule)
    X, _ = problem.split(point.z)
    P = problem.model.position(X)
    rep = evaluate(P, problem.obstacles, sc.safety, sc.agent_radius, sc.R)
    g = grad_F(P, problem.obstacles, sc.safety, sc.agent_radius, sc.R)
    # d F / d z through positions
    Jp = problem.model.position_jacobian(X.reshape(-1, problem.nx))  # (N (T+1), 2, nx)
    gx = np.einsum("ka,kab->kb", g.positions.reshape(-1, 2), Jp).reshape(X.shape)
    gz = np.zeros(problem.n)
    gz[problem.ix] = gx
    direct = g.obstacle_params @ problem.dP if g.obstacle_params.size else np.zeros(problem.n_theta)
    grad = gz @ res.primal(problem.n) + direct
    return rep.F, grad, rep


def step(theta, grad, step_size: float, env) -> np.ndarray:
    """Projected ascent step ``clamp(theta + step_size * grad)``."""
    return env.clamp(np.asarray(theta, dtype=float) + step_size * np.asarray(grad, dtype=float))


def _try_solve(scenario, theta, init, options):
    """Solve at ``theta``; the third value is ``"ok"``, ``"inadmissible"`` or ``"lower_failed"``."""
    try:
        scenario.audit(theta)
    except InfeasibleTaskError:
        return None, None, "inadmissible"
    prob = TrajectoryProblem(scenario, theta, check_task=False)
    sol = solve(prob, init=init, options=options)
    if not sol.converged:
        return prob, sol, "lower_failed"
    return prob, sol, "ok"


def run(scenario, theta0=None, config: Optional[BilevelConfig] = None, log: Optional[Callable] = None):
    """Deterministic co-optimization of one scenario.

    Returns ``(theta, problem, solution, trace)`` for the last accepted
    parameters.  If the lower level cannot be solved at ``theta0`` the
    trace status is ``"lower_failed"`` and it holds no records.
    """
    cfg = config or BilevelConfig()
    env = scenario.env
    theta = env.clamp(scenario.theta0 if theta0 is None else theta0)
    trace = BilevelTrace(theta0=theta.copy())
    scenario.audit(theta)
    t0 = time.perf_counter()
    prob, sol, status = _try_solve(scenario, theta, None, cfg.solver)
    trace.solve_times.append(time.perf_counter() - t0)
    if status != "ok":
        trace.status = "lower_failed"
        return theta, prob, sol, trace

    F, grad, rep = upper_gradient(prob, sol, cfg.weak_rule)
    gnorm = _norm(grad)
    trace.append(IterRecord(0, theta.copy(), F, gnorm, 0.0, "initial", sol.status, sol.iterations, rep))
    _emit(log, trace.records[-1])
    trace.status = "max_iter"
    for kappa in range(1, cfg.max_iter + 1):
        if gnorm < cfg.grad_tol or np.array_equal(step(theta, grad, 1.0, env), theta):
            trace.status = "converged"
            break
        acc = trace.F_values
        if len(acc) > cfg.f_window and acc[-1] - acc[-1 - cfg.f_window] < cfg.f_tol:
            trace.status = "stalled"
            break
        alpha = cfg.step_size
        accepted = None
        while alpha >= cfg.step_floor:
            th_new = step(theta, grad, alpha, env)
            t0 = time.perf_counter()
            p_new, s_new, st = _try_solve(scenario, th_new, sol, cfg.solver)
            trace.solve_times.append(time.perf_counter() - t0)
            if st == "ok":
                F_new = metric_value(p_new, s_new, cfg.weak_rule)
                if not cfg.backtracking or F_new >= F - 1e-12:
                    accepted = (th_new, p_new, s_new, alpha, trace.solve_times[-1])
                    break
            alpha *= cfg.backtrack
        if accepted is None:
            trace.append(IterRecord(kappa, theta.copy(), F, gnorm, 0.0, "rejected", sol.status, 0, rep))
            _emit(log, trace.records[-1])
            trace.status = "step_floor"
            break
        theta, prob, sol, alpha, t_solve = accepted
        F, grad, rep = upper_gradient(prob, sol, cfg.weak_rule)
        gnorm = _norm(grad)
        trace.append(IterRecord(kappa, theta.copy(), F, gnorm, alpha, "accepted", sol.status, sol.iterations, rep, solve_time=t_solve))
        _emit(log, trace.records[-1])
    return theta, prob, sol, trace


# ------------------------------------------------------------- stochastic


def _batch_eval(family, theta, tasks, inits, cfg, with_grad: bool):
    """Solve every task of a batch at ``theta``.

    Returns ``(F values, gradients, solutions)`` over the surviving tasks
    and the list of solutions (``None`` for dropped tasks) aligned with
    ``tasks``.
    """
    Fs, grads, sols = [], [], []
    for (S, G), init in zip(tasks, inits):
        sc = family.with_task(S, G)
        prob, sol, st = _try_solve(sc, theta, init, cfg.solver)
        if st != "ok":
            sols.append(None)
            continue
        try:
            if with_grad:
                F, g, _ = upper_gradient(prob, sol, cfg.weak_rule)
                grads.append(g)
            else:
                F = metric_value(prob, sol, cfg.weak_rule)
        except SingularKKTError:
            sols.append(None)
            continue
        Fs.append(F)
        sols.append(sol)
    return np.array(Fs), grads, sols


def stochastic_run(
    family,
    theta0=None,
    config: Optional[BilevelConfig] = None,
    sampler: Optional[Callable] = None,
    log: Optional[Callable] = None,
):
    """Sample-average co-optimization over a task distribution.

    Every iteration draws ``batch_size`` tasks with ``sampler(seed)`` (seeds
    from a generator seeded with ``config.seed``), solves each lower level
    at the current parameters, averages the upper gradients of the
    survivors and steps once.  With backtracking the step is halved until
    the batch-mean F on the same batch does not drop.  Tasks whose solve or
    sensitivity fails are dropped and counted; a batch without survivors is
    skipped.  Records carry batch means.  The F-window stopping rule is not
    used because batch means are noisy.

    Returns ``(theta, trace)``.
    """
    from .scenarios import sample_task

    cfg = config or BilevelConfig()
    sampler = sampler or sample_task
    env = family.env
    theta = env.clamp(family.theta0 if theta0 is None else theta0)
    trace = BilevelTrace(theta0=theta.copy())
    rng = np.random.default_rng(cfg.seed)
    trace.status = "max_iter"
    for kappa in range(cfg.max_iter + 1):
        seeds = rng.integers(0, 2**31 - 1, size=cfg.batch_size)
        tasks = [sampler(int(sd)) for sd in seeds]
        t0 = time.perf_counter()
        Fs, grads, sols = _batch_eval(family, theta, tasks, [None] * len(tasks), cfg, True)
        trace.solve_times.append(time.perf_counter() - t0)
        dropped = len(tasks) - len(Fs)
        if not len(Fs):
            trace.append(IterRecord(kappa, theta.copy(), float("nan"), float("nan"), 0.0, "skipped", "", 0, None, 0, dropped))
            _emit(log, trace.records[-1])
            continue
        F = float(Fs.mean())
        grad = np.mean(grads, axis=0)
        gnorm = _norm(grad)
        if kappa == 0:
            trace.append(IterRecord(0, theta.copy(), F, gnorm, 0.0, "initial", "ok", 0, None, len(Fs), dropped))
            _emit(log, trace.records[-1])
            continue
        if gnorm < cfg.grad_tol:
            trace.append(IterRecord(kappa, theta.copy(), F, gnorm, 0.0, "converged", "ok", 0, None, len(Fs), dropped))
            _emit(log, trace.records[-1])
            trace.status = "converged"
            break
        # re-evaluate the survivors only, warm started from their solutions
        kept = [(t, s) for t, s in zip(tasks, sols) if s is not None]
        alpha = cfg.step_size
        accepted = None
        while alpha >= cfg.step_floor:
            th_new = step(theta, grad, alpha, env)
            Fn, _, sn = _batch_eval(family, th_new, [t for t, _ in kept], [s for _, s in kept], cfg, False)
            if len(Fn) == len(kept) and (not cfg.backtracking or Fn.mean() >= F - 1e-12):
                accepted = (th_new, float(Fn.mean()), alpha)
                break
            alpha *= cfg.backtrack
        if accepted is None:
            trace.append(IterRecord(kappa, theta.copy(), F, gnorm, 0.0, "rejected", "ok", 0, None, len(Fs), dropped))
        else:
            theta, F_new, alpha = accepted
            trace.append(IterRecord(kappa, theta.copy(), F_new, gnorm, alpha, "accepted", "ok", 0, None, len(Fs), dropped))
        _emit(log, trace.records[-1])
    return theta, trace


def expected_F(family, theta, seeds, sampler: Optional[Callable] = None, options: Optional[IpmOptions] = None):
    """Per-task F at ``theta`` on the tasks ``sampler(seed)``; NaN where the solve fails."""
    from .scenarios import sample_task

    sampler = sampler or sample_task
    out = []
    for sd in seeds:
        S, G = sampler(int(sd))
        prob, sol, st = _try_solve(family.with_task(S, G), np.asarray(theta, dtype=float), None, options)
        out.append(metric_value(prob, sol) if st == "ok" else float("nan"))
    return np.array(out)


# ---------------------------------------------------------------- checks


def upper_fd_check(scenario, theta=None, h: float = 1e-5, weak_rule: str = "inactive", options=None, _tamper=None) -> FdReport:
    """Compare :func:`upper_gradient` with central differences of re-solved F.

    Each perturbed problem is warm started from the base solution.  Entries
    whose active set changes at ``theta +- h`` are flagged, not judged.
    ``_tamper`` corrupts the analytic gradient (used to test the check).
    """
    theta = scenario.env.clamp(scenario.theta0 if theta is None else theta)
    prob = TrajectoryProblem(scenario, theta)
    sol = solve(prob, options=options)
    if not sol.converged:
        raise InfeasibleTaskError(f"lower level did not converge at theta ({sol.status})")
    _, grad, _ = upper_gradient(prob, sol, weak_rule)
    if _tamper is not None:
        grad = _tamper(grad.copy())
    _, aset0 = crisp(prob, sol, weak_rule=weak_rule)
    rows = []
    for k in range(theta.size):
        e = np.zeros(theta.size)
        e[k] = h
        vals, flag = [], "ok"
        for sgn in (1.0, -1.0):
            pk = TrajectoryProblem(scenario, theta + sgn * e, check_task=False)
            sk = solve(pk, init=sol, options=options)
            if not sk.converged:
                flag = "solve_failed"
                break
            ck, ak = crisp(pk, sk, weak_rule=weak_rule)
            if not ak.same_as(aset0):
                flag = "active_set_change"
            vals.append(safety_report(pk, ck.z).F)
        if flag == "solve_failed":
            rows.append(FdRow(k, abs(grad[k]), float("nan"), float("nan"), flag))
            continue
        fd = (vals[0] - vals[1]) / (2 * h)
        a, b = np.array([grad[k]]), np.array([fd])
        rows.append(FdRow(k, abs(grad[k]), abs(fd), _rel_err(a, b, floor=FD_FLOOR_F), flag))
    return FdReport(tuple(rows), h)


#: gradient entries below this are compared in absolute terms (F is O(1))
FD_FLOOR_F = 1e-6


def _norm(g) -> float:
    return float(np.max(np.abs(g))) if np.size(g) else 0.0


def _emit(log, rec):
    if log is not None:
        log(rec)

"""``co-nav``: solve, co-optimize and validate scenarios from config files.

Exit codes: 0 success, 1 usage or config error, 2 numerical
non-convergence, 3 validation failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import bilevel
from .config import RunConfig, load_config
from .errors import ConavError, ConfigError
from .output import atomic_write, emit_svg, emit_trajectory_csv, fmt
from .scenarios import compute_metrics
from .trajopt import TrajectoryProblem, audit, kkt_norm, solve

log = logging.getLogger("conav")

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_VALIDATION = 0, 1, 2, 3


def _theta_text(theta) -> str:
    return " ".join(f"{v:.12e}" for v in np.atleast_1d(theta)) + "\n"


def _section(name: str, body: str) -> str:
    return f"[{name}]\n{body.rstrip()}\n"


def _solve_at(scenario, theta, cfg: RunConfig):
    prob = TrajectoryProblem(scenario, theta)
    sol = solve(prob, options=cfg.solver)
    return prob, sol


def _solution_sections(name, scenario, theta, prob, sol, reference_lengths=None) -> tuple[str, object]:
    X, _ = prob.trajectories(sol)
    met = compute_metrics(scenario, theta, X, sol.wall_time, reference_lengths)
    rep = bilevel.safety_report(prob, sol.z)
    aud = audit(prob, sol)
    solver = "\n".join(
        [
            f"status = {sol.status}",
            f"iterations = {sol.iterations}",
            f"kkt_inf_norm = {kkt_norm(prob, sol):.3e}",
            f"objective = {fmt(prob.objective(sol.z))}",
        ]
    )
    text = (
        _section(f"{name}.solver", solver)
        + _section(f"{name}.audit", aud.to_text())
        + _section(f"{name}.metrics", met.to_text())
        + _section(f"{name}.safety", rep.to_text())
    )
    return text, met


# --------------------------------------------------------------- commands


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    sc = cfg.build()
    theta = sc.theta0
    prob, sol = _solve_at(sc, theta, cfg)
    X, U = prob.trajectories(sol)
    text, _ = _solution_sections("solution", sc, theta, prob, sol)
    head = f"scenario = {sc.name}\nconfig = {cfg.source}\ntheta = {_theta_text(theta)}"
    if cfg.emit["csv"]:
        emit_trajectory_csv(sc.dynamics, X, U, sc.dt, out / "trajectories.csv")
    if cfg.emit["svg"]:
        emit_svg(sc, theta, X, out / "scene.svg", title=sc.name)
    if cfg.emit["report"]:
        atomic_write(out / "report.txt", head + "\n" + text)
    log.info("solve %s: %s after %d iterations", sc.name, sol.status, sol.iterations)
    return EXIT_OK if sol.converged else EXIT_NONCONVERGED


def cmd_cooptimize(cfg: RunConfig, out: Path) -> int:
    sc = cfg.build()
    if cfg.stochastic:
        return _cooptimize_stochastic(cfg, sc, out)
    theta0 = sc.theta0
    emit = lambda r: log.info(r.line())  # noqa: E731
    theta, prob, sol, trace = bilevel.run(sc, theta0, cfg.bilevel, log=emit)
    if cfg.emit["trace"]:
        atomic_write(out / "trace.txt", trace.to_text())
    if trace.status == "lower_failed":
        log.error("lower level failed at the initial parameters")
        return EXIT_NONCONVERGED
    atomic_write(out / "theta.txt", _theta_text(theta))
    p0, s0 = _solve_at(sc, theta0, cfg)
    X0, U0 = p0.trajectories(s0)
    X1, U1 = prob.trajectories(sol)
    ref = _lengths(sc, X0) if sc.metric == "distance_ratio" else None
    before, _ = _solution_sections("initial", sc, theta0, p0, s0, ref)
    after, _ = _solution_sections("final", sc, theta, prob, sol, ref)
    if cfg.emit["csv"]:
        emit_trajectory_csv(sc.dynamics, X1, U1, sc.dt, out / "trajectories.csv")
        emit_trajectory_csv(sc.dynamics, X0, U0, sc.dt, out / "trajectories_initial.csv")
    if cfg.emit["svg"]:
        emit_svg(sc, theta0, X0, out / "before.svg", title=f"{sc.name}: initial")
        emit_svg(sc, theta, X1, out / "after.svg", title=f"{sc.name}: optimized")
    if cfg.emit["report"]:
        F0, F1 = trace.records[0].F, trace.records[-1].F
        head = (
            f"scenario = {sc.name}\nconfig = {cfg.source}\nstatus = {trace.status}\n"
            f"iterations = {len(trace.records) - 1}\nF_initial = {F0:.12e}\nF_final = {F1:.12e}\n"
            f"theta_initial = {_theta_text(theta0)}theta_final = {_theta_text(theta)}"
        )
        atomic_write(out / "report.txt", head + "\n" + before + "\n" + after)
    return EXIT_OK


def _lengths(sc, X):
    from .scenarios import path_lengths

    return path_lengths(sc.dynamics.position(X))


def _cooptimize_stochastic(cfg: RunConfig, sc, out: Path) -> int:
    emit = lambda r: log.info("%s, tasks=%d, dropped=%d", r.line(), r.n_tasks, r.dropped)  # noqa: E731
    theta0 = sc.theta0
    theta, trace = bilevel.stochastic_run(sc, theta0, cfg.bilevel, log=emit)
    if cfg.emit["trace"]:
        atomic_write(out / "trace.txt", trace.to_text())
    atomic_write(out / "theta.txt", _theta_text(theta))
    lines = ["seed, F_initial, F_final"]
    if cfg.heldout:
        F0 = bilevel.expected_F(sc, theta0, cfg.heldout, options=cfg.solver)
        F1 = bilevel.expected_F(sc, theta, cfg.heldout, options=cfg.solver)
        lines += [f"{s}, {a:.12e}, {b:.12e}" for s, a, b in zip(cfg.heldout, F0, F1)]
        lines.append(f"mean, {np.nanmean(F0):.12e}, {np.nanmean(F1):.12e}")
    if cfg.emit["report"]:
        head = f"scenario = {sc.name}\nconfig = {cfg.source}\nstatus = {trace.status}\nbatch_size = {cfg.bilevel.batch_size}\n"
        atomic_write(out / "report.txt", head + "\n" + _section("heldout", "\n".join(lines)))
    if cfg.emit["csv"] or cfg.emit["svg"]:
        # draw the scenario's own task before and after
        p0, s0 = _solve_at(sc, theta0, cfg)
        p1, s1 = _solve_at(sc, theta, cfg)
        for tag, th, p, s in (("initial", theta0, p0, s0), ("final", theta, p1, s1)):
            X, U = p.trajectories(s)
            if cfg.emit["csv"]:
                name = "trajectories.csv" if tag == "final" else "trajectories_initial.csv"
                emit_trajectory_csv(sc.dynamics, X, U, sc.dt, out / name)
            if cfg.emit["svg"]:
                emit_svg(sc, th, X, out / ("after.svg" if tag == "final" else "before.svg"), title=f"{sc.name}: {tag}")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    from .validation import gradient_checks, property_suite

    sc = cfg.build()
    v = cfg.validate
    checks = property_suite(sc.obstacles(sc.theta0), sc.safety, sc.agent_radius, sc.workspace, v["systems"], cfg.bilevel.seed)
    gchecks, table = gradient_checks(sc, h=v["h"], tol=v["tol"], tamper=v["tamper"], options=cfg.solver)
    checks += gchecks
    text = "\n".join(c.line() for c in checks) + "\n"
    if cfg.emit["report"]:
        atomic_write(out / "validate.txt", text + ("\n" + table if table else ""))
    for c in checks:
        (log.info if c.passed else log.error)(c.line())
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


COMMANDS = {"solve": cmd_solve, "cooptimize": cmd_cooptimize, "validate": cmd_validate}


# -------------------------------------------------------------------- main


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="co-nav", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="config path or shipped config name")
    p.add_argument("--seed", type=int, default=None, help="seed for task sampling and the builder")
    p.add_argument("--out", default="out", help="output directory (default: ./out)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE", help="override a config entry, e.g. bilevel.step_size=50")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides, args.seed)
        sc_check = cfg.build()
        del sc_check
    except ConfigError as exc:
        print(f"co-nav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConavError as exc:
        print(f"co-nav: invalid scenario: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](cfg, Path(args.out))
    except ConfigError as exc:
        print(f"co-nav: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.debug("%s finished in %.2f s", args.command, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())

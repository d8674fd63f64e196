"""Scan F over the two-obstacle parameters and run the optimizer from the worst corner.

Prints F on a coarse grid of the discs' y-positions (re-solving the
trajectories at each point), then co-optimizes from y = (0, 0) and writes
before/after drawings to ``demo_out/``.

    python demos/two_obstacle_landscape.py [--grid 7]
"""
import argparse
from pathlib import Path

import numpy as np

from conav.bilevel import BilevelConfig, metric_value, run
from conav.output import emit_svg
from conav.scenarios import build
from conav.trajopt import TrajectoryProblem, solve


def landscape(sc, ys):
    F = np.full((ys.size, ys.size), np.nan)
    for a, y0 in enumerate(ys):
        for b, y1 in enumerate(ys):
            p = TrajectoryProblem(sc, [y0, y1], check_task=False)
            sol = solve(p)
            if sol.converged:
                F[a, b] = metric_value(p, sol)
    return F


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=7)
    ap.add_argument("--out", default="demo_out")
    args = ap.parse_args()

    sc = build("two_obstacle")
    ys = np.linspace(sc.env.lower[0], sc.env.upper[0], args.grid)
    F = landscape(sc, ys)
    print("F(y_0 down, y_1 across)")
    print("       " + " ".join(f"{y:7.2f}" for y in ys))
    for y, row in zip(ys, F):
        print(f"{y:7.2f}" + " ".join(f"{v:7.4f}" for v in row))

    theta, prob, sol, trace = run(sc, [0.0, 0.0], BilevelConfig(step_size=200.0, max_iter=15))
    print()
    print(trace.to_text())
    out = Path(args.out)
    p0 = TrajectoryProblem(sc, [0.0, 0.0])
    X0, _ = p0.trajectories(solve(p0))
    X1, _ = prob.trajectories(sol)
    emit_svg(sc, np.zeros(2), X0, out / "two_obstacle_before.svg", title="y = (0, 0)")
    emit_svg(sc, theta, X1, out / "two_obstacle_after.svg", title="optimized")
    print(f"drawings in {out}/")


if __name__ == "__main__":
    main()

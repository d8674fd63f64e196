"""Navigation metrics of solved trajectories."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..safety import obstacle_distances, pair_distances

#: distances above this (negative) value are not counted as interpenetration
COLLISION_TOL = -1e-6


@dataclass(frozen=True)
class NavMetrics:
    spl: float
    pct_speed: float
    num_coll: float
    distance_ratio: float
    wall_time: float
    success: tuple = ()
    path_lengths: tuple = ()

    def as_dict(self) -> dict:
        d = asdict(self)
        d["success"] = ",".join(str(int(s)) for s in self.success)
        d["path_lengths"] = ",".join(f"{v:.9g}" for v in self.path_lengths)
        return d

    def to_text(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {v:.9g}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines)


def path_lengths(positions) -> np.ndarray:
    P = np.asarray(positions, dtype=float)
    return np.linalg.norm(np.diff(P, axis=1), axis=-1).sum(axis=1)


def count_runs(mask) -> int:
    """Number of maximal runs of True along the last axis, summed over the rest."""
    m = np.asarray(mask, dtype=bool)
    if m.size == 0:
        return 0
    starts = m[..., 0].sum() + np.count_nonzero(m[..., 1:] & ~m[..., :-1])
    return int(starts)


def collision_counts(positions, obstacles, agent_radius: float) -> np.ndarray:
    """Per-agent number of interpenetration events.

    An event is a maximal run of consecutive steps during which the agent
    overlaps one particular obstacle or one particular other agent.
    """
    P = np.asarray(positions, dtype=float)
    n = P.shape[0]
    counts = np.zeros(n, dtype=int)
    if obstacles:
        d = obstacle_distances(P, obstacles, agent_radius)  # (N, T+1, M)
        for i in range(n):
            counts[i] += count_runs((d[i] < COLLISION_TOL).T)
    if n > 1:
        d = pair_distances(P, agent_radius)  # (N, N, T+1)
        for i in range(n):
            counts[i] += count_runs(np.delete(d[i], i, axis=0) < COLLISION_TOL)
    return counts


def compute_metrics(
    scenario,
    theta,
    X,
    wall_time: float = float("nan"),
    reference_lengths: Optional[np.ndarray] = None,
) -> NavMetrics:
    """SPL, PCTSpeed, NumCOLL and the distance ratio of state trajectories ``X``.

    ``reference_lengths`` (per-agent traveled distances in a baseline
    environment) is needed for the distance ratio; without it the ratio is
    NaN.  Scenarios scored by distance ratio report SPL as NaN.
    """
    m = scenario.dynamics
    X = np.asarray(X, dtype=float)
    P = m.position(X)
    S, G = scenario.task(theta)
    ps, pg = m.position(S), m.position(G)
    obstacles = scenario.obstacles(theta)
    coll = collision_counts(P, obstacles, scenario.agent_radius)
    L = path_lengths(P)
    reached = np.linalg.norm(P[:, -1] - pg, axis=1) <= scenario.goal_tolerance
    success = reached & (coll == 0)
    if scenario.metric == "spl":
        ell = np.linalg.norm(pg - ps, axis=1)
        denom = np.maximum(L, ell)
        ratio = np.where(denom > 0, ell / np.where(denom > 0, denom, 1.0), 1.0)
        spl = float(np.mean(success * ratio))
    else:
        spl = float("nan")
    vmax = scenario.max_speed
    pct = float(np.mean(m.speed(X)) / vmax) if vmax else float("nan")
    if reference_lengths is not None:
        ref = np.asarray(reference_lengths, dtype=float)
        dr = float(L.sum() / ref.sum())
    else:
        dr = float("nan")
    return NavMetrics(
        spl, pct, float(coll.mean()), dr, float(wall_time), tuple(bool(s) for s in success), tuple(float(v) for v in L)
    )

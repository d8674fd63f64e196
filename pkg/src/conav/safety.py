"""Safety metric of a multi-agent system in a parametric environment.

Each agent accumulates a repulsive potential ``w / (d + eps)`` from every
obstacle and every other agent closer than ``tau``.  Averaged over time and
normalized by the contact value ``w / eps`` this gives per-agent unsafety
masses in ``[0, 1]`` with respect to obstacles and to other agents; the
system masses are means over agents and are fused with weights ``M`` and
``N - 1``.  The scalar metric is ``F = R * S`` where ``S`` is the fused
safety mass and ``R`` defaults to ``1 / (M + N - 1)`` so that ``F`` is in
``[0, 1]``.

Positions are arrays of shape ``(N, T + 1, 2)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .geometry import INACTIVE_DISTANCE, agent_pair_distance, param_slices

#: distances are clamped from below at ``-eps + CLAMP_MARGIN`` so that d + eps > 0
CLAMP_MARGIN = 1e-6
#: evaluations this close to the potential switch are counted as warnings
SWITCH_WINDOW = 1e-9


@dataclass(frozen=True)
class SafetyParams:
    w: float = 1.0
    eps: float = 0.1
    tau: float = 2.5
    smooth: bool = False
    smooth_width: float = 0.05

    def __post_init__(self):
        if not (self.w > 0 and self.eps > 0 and self.tau > 0):
            raise ValueError(f"w, eps and tau must be positive, got {self}")
        if self.smooth and not 0 < self.smooth_width < self.tau:
            raise ValueError("smooth_width must lie in (0, tau)")


def _clamp(d, params: SafetyParams):
    d = np.asarray(d, dtype=float)
    floor = -params.eps + CLAMP_MARGIN
    return np.maximum(d, floor), d < floor


def _blend(d, params: SafetyParams):
    """Cubic switch weight and its derivative in d (1 well inside tau, 0 beyond)."""
    s = np.clip((params.tau - d) / params.smooth_width, 0.0, 1.0)
    h = s * s * (3 - 2 * s)
    dh = np.where((s > 0) & (s < 1), -(6 * s - 6 * s * s) / params.smooth_width, 0.0)
    return h, dh


def obstacle_potential(d, params: SafetyParams):
    """Repulsive potential ``w / (d + eps)`` inside the threshold, else 0."""
    d = np.asarray(d, dtype=float)
    base = params.w / (d + params.eps)
    if params.smooth:
        return base * _blend(d, params)[0]
    return np.where(d <= params.tau, base, 0.0)


def _normalized_terms(d, params: SafetyParams):
    """Per-term normalized potential in [0, 1] and its derivative in d.

    Overlapping discs (d < 0) saturate at 1 with zero slope.
    """
    dc, clamped = _clamp(d, params)
    base = params.w / (dc + params.eps)
    dbase = -params.w / (dc + params.eps) ** 2
    if params.smooth:
        h, dh = _blend(dc, params)
        val, dval = base * h, dbase * h + base * dh
    else:
        on = dc <= params.tau
        val, dval = np.where(on, base, 0.0), np.where(on, dbase, 0.0)
    scale = params.eps / params.w
    val, dval = val * scale, dval * scale
    sat = val >= 1.0
    val = np.where(sat, 1.0, val)
    dval = np.where(sat | clamped, 0.0, dval)
    near = (np.abs(dc - params.tau) < SWITCH_WINDOW) & ~params.smooth
    return val, dval, int(np.count_nonzero(clamped)), int(np.count_nonzero(near))


def collision_zone(traj_i, traj_j, params: SafetyParams, agent_radius: float) -> list[int]:
    """Time steps at which two agents are within ``tau`` of each other."""
    a = np.asarray(traj_i, dtype=float)
    b = np.asarray(traj_j, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"trajectory shapes differ: {a.shape} vs {b.shape}")
    d = agent_pair_distance(a, b, agent_radius)
    return [int(t) for t in np.flatnonzero(d <= params.tau)]


def obstacle_distances(positions, obstacles, agent_radius: float) -> np.ndarray:
    """Signed distances of shape ``(N, T + 1, M)``."""
    P = np.asarray(positions, dtype=float)
    n, t1 = P.shape[:2]
    out = np.empty((n, t1, len(obstacles)))
    flat = P.reshape(-1, 2)
    for j, ob in enumerate(obstacles):
        out[:, :, j] = np.asarray(ob.signed_distance(flat, agent_radius)).reshape(n, t1)
    return out


def pair_distances(positions, agent_radius: float) -> np.ndarray:
    """Boundary distances of shape ``(N, N, T + 1)``; the diagonal is +inf."""
    P = np.asarray(positions, dtype=float)
    n = P.shape[0]
    d = agent_pair_distance(P[:, None, :, :], P[None, :, :, :], agent_radius)
    d[np.arange(n), np.arange(n)] = np.inf
    return d


def unsafety_wrt_obstacles(positions, obstacles, params: SafetyParams, agent_radius: float):
    """Per-agent and system unsafety with respect to obstacles.

    Returns ``(p_agent (N,), p_system)``.  Without obstacles both are zero.
    """
    P = np.asarray(positions, dtype=float)
    n, t1 = P.shape[:2]
    m = len(obstacles)
    if m == 0 or n == 0:
        return np.zeros(n), 0.0
    val = _normalized_terms(obstacle_distances(P, obstacles, agent_radius), params)[0]
    per_agent = val.sum(axis=(1, 2)) / (m * t1)
    return per_agent, float(per_agent.mean())


def unsafety_among_agents(positions, params: SafetyParams, agent_radius: float):
    """Per-agent and system unsafety among agents; zero for fewer than two agents."""
    P = np.asarray(positions, dtype=float)
    n, t1 = P.shape[:2]
    if n < 2:
        return np.zeros(n), 0.0
    val = _normalized_terms(pair_distances(P, agent_radius), params)[0]
    per_agent = val.sum(axis=(1, 2)) / ((n - 1) * t1)
    return per_agent, float(per_agent.mean())


def combine(p_obstacles: float, p_agents: float, M: int, N: int):
    """Fused unsafety and safety masses ``(P, S)``."""
    k_agents = max(N - 1, 0)
    P = p_obstacles * M + p_agents * k_agents
    S = (1.0 - p_obstacles) * M + (1.0 - p_agents) * k_agents
    return P, S


def default_regularizer(M: int, N: int) -> float:
    denom = M + N - 1
    return 1.0 / denom if denom > 0 else 1.0


@dataclass(frozen=True)
class SafetyReport:
    per_agent_obstacle: np.ndarray
    per_agent_pair: np.ndarray
    p_obstacle: float
    s_obstacle: float
    p_agents: float
    s_agents: float
    P: float
    S: float
    F: float
    R: float
    M: int
    N: int
    clamped: int = 0
    switch_warnings: int = 0

    def as_dict(self) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, np.ndarray):
                for i, x in enumerate(v):
                    out[f"{k}[{i}]"] = float(x)
            else:
                out[k] = v
        return out

    def to_text(self) -> str:
        lines = []
        for k, v in self.as_dict().items():
            lines.append(f"{k} = {v:.12g}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines)


def evaluate(positions, obstacles, params: SafetyParams, agent_radius: float, R=None) -> SafetyReport:
    """Full safety report for one system."""
    P = np.asarray(positions, dtype=float)
    n = P.shape[0]
    m = len(obstacles)
    pd_i, pd = unsafety_wrt_obstacles(P, obstacles, params, agent_radius)
    pa_i, pa = unsafety_among_agents(P, params, agent_radius)
    Pm, Sm = combine(pd, pa, m, n)
    R = default_regularizer(m, n) if R is None else float(R)
    clamped = switch = 0
    if m and n:
        _, _, c, s = _normalized_terms(obstacle_distances(P, obstacles, agent_radius), params)
        clamped += c
        switch += s
    if n > 1:
        _, _, c, s = _normalized_terms(pair_distances(P, agent_radius), params)
        clamped += c
        switch += s
    # a lone agent among no obstacles has nothing to be unsafe with
    F = R * Sm if m + max(n - 1, 0) > 0 else 1.0
    return SafetyReport(pd_i, pa_i, pd, 1.0 - pd, pa, 1.0 - pa, Pm, Sm, F, R, m, n, clamped, switch)


def metric_F(positions, obstacles, params: SafetyParams, agent_radius: float, R=None) -> float:
    return evaluate(positions, obstacles, params, agent_radius, R).F


@dataclass
class GradF:
    """Gradient of F w.r.t. agent positions ``(N, T + 1, 2)`` and the stacked obstacle parameters."""

    positions: np.ndarray
    obstacle_params: np.ndarray
    switch_warnings: int = 0
    degenerate: list = field(default_factory=list)


def grad_F(positions, obstacles, params: SafetyParams, agent_radius: float, R=None) -> GradF:
    """Analytic gradient of :func:`metric_F`.

    Only terms with a nonzero potential slope are differentiated, so points
    beyond the threshold, overlapping discs and inactive segment feet never
    touch the distance gradients.
    """
    P = np.asarray(positions, dtype=float)
    n, t1 = P.shape[:2]
    m = len(obstacles)
    R = default_regularizer(m, n) if R is None else float(R)
    gP = np.zeros_like(P)
    slices = param_slices(obstacles)
    gQ = np.zeros(slices[-1].stop if slices else 0)
    warnings = 0

    if m and n:
        d = obstacle_distances(P, obstacles, agent_radius)
        _, dval, _, warnings_o = _normalized_terms(d, params)
        warnings += warnings_o
        # F = R * (M - M * mean_i p_i - ...); p_i = sum_{t,j} val / (M (T+1))
        coef = -R * dval / (n * t1)
        for j, ob in enumerate(obstacles):
            c = coef[:, :, j]
            idx = np.argwhere((c != 0.0) & (d[:, :, j] < INACTIVE_DISTANCE))
            if not len(idx):
                continue
            pts = P[idx[:, 0], idx[:, 1]]
            gp, gq = ob.distance_gradients(pts, agent_radius)
            w = c[idx[:, 0], idx[:, 1]]
            np.add.at(gP, (idx[:, 0], idx[:, 1]), w[:, None] * gp)
            gQ[slices[j]] += w @ gq

    if n > 1:
        d = pair_distances(P, agent_radius)
        _, dval, _, warnings_a = _normalized_terms(d, params)
        warnings += warnings_a // 2
        # each unordered pair appears in two per-agent sums
        coef = -R * dval / (n * t1)
        ii, jj, tt = np.nonzero(coef)
        if len(ii):
            diff = P[ii, tt] - P[jj, tt]
            dist = np.linalg.norm(diff, axis=1)
            unit = diff / dist[:, None]
            w = coef[ii, jj, tt]
            # coef[i, j, t] == coef[j, i, t]: each ordered entry contributes to both ends
            np.add.at(gP, (ii, tt), w[:, None] * unit)
            np.add.at(gP, (jj, tt), -w[:, None] * unit)
    return GradF(gP, gQ, warnings)


# ------------------------------------------------------------ properties


def unsafety_mass(positions, obstacles, params: SafetyParams, agent_radius: float) -> float:
    """Fused unsafety mass ``p_obstacles * M + p_agents * (N - 1)``; 0 for no agents."""
    P = np.asarray(positions, dtype=float)
    if P.shape[0] == 0:
        return 0.0
    _, pd = unsafety_wrt_obstacles(P, obstacles, params, agent_radius)
    _, pa = unsafety_among_agents(P, params, agent_radius)
    return combine(pd, pa, len(obstacles), P.shape[0])[0]


def are_disjoint(parts, params: SafetyParams, agent_radius: float) -> bool:
    """True when no agent of one system ever comes within ``tau`` of an agent of another."""
    for k, A in enumerate(parts):
        for B in parts[k + 1 :]:
            for a in A:
                for b in B:
                    if collision_zone(a, b, params, agent_radius):
                        return False
    return True


def union_residuals(parts, obstacles, params: SafetyParams, agent_radius: float):
    """``(N P(union), sum_k N_k P(A_k))`` for systems sharing the time grid.

    Equal when the systems are disjoint; the first is never smaller.
    """
    parts = [np.asarray(A, dtype=float) for A in parts]
    sizes = [A.shape[0] for A in parts]
    nonempty = [A for A in parts if A.shape[0]]
    union = np.concatenate(nonempty, axis=0) if nonempty else np.zeros((0, 1, 2))
    lhs = sum(sizes) * unsafety_mass(union, obstacles, params, agent_radius)
    rhs = sum(n * unsafety_mass(A, obstacles, params, agent_radius) for n, A in zip(sizes, parts))
    return float(lhs), float(rhs)

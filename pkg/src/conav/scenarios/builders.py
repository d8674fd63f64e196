"""Constructors for the shipped navigation scenarios.

Every builder takes plain keyword arguments (the same keys the YAML configs
use) and returns a :class:`ScenarioSpec`.  Obstacle parameter maps are
written with numpy arithmetic only, so they also accept complex input.
"""
from __future__ import annotations

import numpy as np

from ..errors import ConfigError, InfeasibleTaskError
from ..geometry import Circle, LineBoundary, TrackBoundary
from ..safety import SafetyParams
from .spec import EnvParams, ScenarioSpec

WORKSPACE = (-10.0, 10.0, -10.0, 10.0)


def _safety(cfg) -> SafetyParams:
    cfg = dict(cfg or {})
    return SafetyParams(**cfg)


def _bounds(model: str, pos: float, vel: float, acc: float, turn: float = 1.0, heading: float = 7.0):
    """State/control boxes per dynamics model."""
    if model == "double_integrator":
        return dict(
            state_lower=[-pos, -pos, -vel, -vel],
            state_upper=[pos, pos, vel, vel],
            control_lower=[-acc, -acc],
            control_upper=[acc, acc],
        )
    if model == "unicycle":
        return dict(
            state_lower=[-pos, -pos, -heading, -vel],
            state_upper=[pos, pos, heading, vel],
            control_lower=[-acc, -turn],
            control_upper=[acc, turn],
        )
    raise ConfigError(f"model {model!r} not supported by this builder")


def _weights(model: str, r1: float, r2: float):
    return dict(R1=np.diag([r1, r1, 0.0, 0.0]), R2=r2 * np.eye(2))


def _rest(model: str, p, heading=0.0):
    p = np.asarray(p, dtype=float)
    if model == "unicycle":
        h = np.broadcast_to(np.asarray(heading, dtype=float), p.shape[:-1])
        return np.concatenate([p, h[..., None], np.zeros(p.shape[:-1] + (1,))], axis=-1)
    return np.concatenate([p, np.zeros(p.shape[:-1] + (2,))], axis=-1)


def _circle_map(n: int, radius: float):
    def param_map(theta):
        c = theta.reshape(n, 2)
        r = radius + 0.0 * c[:, :1]
        return np.concatenate([c, r], axis=1).ravel()

    return param_map


# ------------------------------------------------------------------ warehouse


def warehouse_grid(spacing: float = 5.0) -> np.ndarray:
    """Regular 3 x 3 shelf layout, flattened centers."""
    g = spacing * np.array([-1.0, 0.0, 1.0])
    return np.array([[x, y] for x in g for y in g]).ravel()


def random_layout(rng, n: int, lo: float, hi: float, radius: float, gap: float, tries: int = 1000) -> np.ndarray:
    """``n`` shelf centers in ``[lo, hi]^2`` keeping ``gap`` between discs."""
    for _ in range(tries):
        out = []
        for _ in range(50 * n):
            c = rng.uniform(lo, hi, 2)
            if all(np.hypot(*(c - o)) >= 2 * radius + gap for o in out):
                out.append(c)
                if len(out) == n:
                    return np.array(out).ravel()
        # restart from scratch if packing got stuck
    raise InfeasibleTaskError(f"could not place {n} shelves after {tries} attempts")


def build_warehouse(
    n_agents: int = 4,
    seed: int = 0,
    horizon: int = 30,
    dt: float = 0.5,
    shelf_radius: float = 1.5,
    n_shelves: int = 9,
    center_bound: float = 7.0,
    shelf_gap: float = 0.2,
    lane: float = 9.0,
    combiner: str = "sum",
    max_speed: float = 3.0,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    layout: str = "random",
    safety=None,
    agent_radius: float = 0.3,
    name: str = "warehouse",
) -> ScenarioSpec:
    """Shelves in a 20 m square; agents cross from the left edge to the right edge.

    ``theta`` holds the shelf centers ``(x_0, y_0, ..., x_8, y_8)``.  The
    start layout is random (seeded) or the regular grid (``layout="grid"``);
    the other one is stored under ``baselines``.
    """
    if n_agents not in (4, 8):
        raise ConfigError("warehouse supports 4 or 8 agents")
    rng = np.random.default_rng(seed)
    slots = np.arange(-lane, lane + 1.0)
    ys = rng.choice(slots, n_agents, replace=False)
    yg = rng.choice(slots, n_agents, replace=False)
    starts = _rest("double_integrator", np.stack([np.full(n_agents, -lane), ys], axis=1))
    goals = _rest("double_integrator", np.stack([np.full(n_agents, lane), yg], axis=1))
    rand = random_layout(rng, n_shelves, -center_bound, center_bound, shelf_radius, shelf_gap)
    grid = warehouse_grid() if n_shelves == 9 else rand
    theta0 = rand if layout == "random" else grid
    sp = _safety(safety or dict(w=1.0, eps=0.1, tau=2.5))
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=starts,
        goals=goals,
        horizon=horizon,
        dt=dt,
        env=EnvParams(theta0, -center_bound, center_bound),
        templates=tuple(Circle((0.0, 0.0), shelf_radius, combiner) for _ in range(n_shelves)),
        param_map=_circle_map(n_shelves, shelf_radius),
        agent_radius=agent_radius,
        safety=sp,
        max_speed=max_speed,
        workspace=WORKSPACE,
        baselines={"random": rand, "grid": grid},
        meta={"seed": seed},
        **_bounds("double_integrator", 10.0, max_speed, max_accel),
        **_weights("double_integrator", r1, r2),
    )


def build_warehouse_mini(
    horizon: int = 10,
    dt: float = 1.0,
    theta0=(0.0, 0.3, 3.0, -1.0),
    starts=((-9.0, -1.0), (-9.0, 1.5)),
    goals=((9.0, 1.0), (9.0, -2.0)),
    shelf_radius: float = 1.5,
    center_bound: float = 7.0,
    combiner: str = "sum",
    max_speed: float = 3.0,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    safety=None,
    name: str = "warehouse_mini",
) -> ScenarioSpec:
    """Two agents, two shelves: the small instance used for gradient checks."""
    theta0 = np.asarray(theta0, dtype=float)
    n = theta0.size // 2
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=_rest("double_integrator", starts),
        goals=_rest("double_integrator", goals),
        horizon=horizon,
        dt=dt,
        env=EnvParams(theta0, -center_bound, center_bound),
        templates=tuple(Circle((0.0, 0.0), shelf_radius, combiner) for _ in range(n)),
        param_map=_circle_map(n, shelf_radius),
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=max_speed,
        workspace=WORKSPACE,
        **_bounds("double_integrator", 10.0, max_speed, max_accel),
        **_weights("double_integrator", r1, r2),
    )


def sample_task(seed, n_side: int = 2, grid: int = 19, edge: float = 9.0, min_gap: float = 1.0):
    """Random warehouse task: ``n_side`` agents left to right, ``n_side`` top to bottom.

    Starts are drawn from ``grid`` slots along the left and top edges, goals
    from the same number of slots along the right and bottom edges.  A
    left-to-right agent never keeps its row and a top-to-bottom agent never
    keeps its column, so every task needs some lateral motion.  Returns
    double-integrator rest states ``(S, G)``.
    """
    rng = np.random.default_rng(seed)
    slots = np.linspace(-edge, edge, grid)
    for _ in range(1000):
        ys = rng.choice(slots, n_side, replace=False)
        yg = rng.choice(slots, n_side, replace=False)
        xs = rng.choice(slots, n_side, replace=False)
        xg = rng.choice(slots, n_side, replace=False)
        if np.any(np.abs(ys - yg) < min_gap) or np.any(np.abs(xs - xg) < min_gap):
            continue
        S = np.concatenate([np.stack([np.full(n_side, -edge), ys], 1), np.stack([xs, np.full(n_side, edge)], 1)])
        G = np.concatenate([np.stack([np.full(n_side, edge), yg], 1), np.stack([xg, np.full(n_side, -edge)], 1)])
        # keep starts (and goals) of different agents apart, corners included
        if _min_dist(S) < 2.0 or _min_dist(G) < 2.0:
            continue
        return _rest("double_integrator", S), _rest("double_integrator", G)
    raise InfeasibleTaskError("task sampler failed to find a non-degenerate task")


def _min_dist(P) -> float:
    d = np.linalg.norm(P[:, None] - P[None], axis=-1) + np.eye(len(P)) * 1e9
    return float(d.min())


def build_warehouse_stochastic(seed: int = 0, layout: str = "grid", **kw) -> ScenarioSpec:
    """Warehouse with a task drawn by :func:`sample_task`; ``seed`` picks the task."""
    base = build_warehouse(4, seed=seed, layout=layout, name=kw.pop("name", "warehouse_stochastic"), **kw)
    S, G = sample_task(seed)
    return base.with_task(S, G)


build_warehouse_stochastic.forwards_to = build_warehouse


# ----------------------------------------------------------------- roundabout


def build_roundabout(
    n_agents: int = 12,
    ring_radius: float = 8.0,
    r0: float = 2.0,
    r_bounds=(0.5, 6.0),
    large_radius: float = 5.0,
    horizon: int = 24,
    dt: float = 0.5,
    max_speed: float = 3.0,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    init_bulge: float = 1.5,
    combiner: str = "sum",
    safety=None,
    name: str = "roundabout",
) -> ScenarioSpec:
    """Agents on a ring heading to the antipodal point around a central disc of radius ``theta``."""
    ang = 2 * np.pi * np.arange(n_agents) / n_agents
    P = ring_radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=_rest("double_integrator", P),
        goals=_rest("double_integrator", -P),
        horizon=horizon,
        dt=dt,
        env=EnvParams([r0], r_bounds[0], r_bounds[1], names=("radius",)),
        templates=(Circle((0.0, 0.0), 1.0, combiner),),
        param_map=lambda th: np.concatenate([0.0 * th, 0.0 * th, th]),
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=max_speed,
        init_bulge=init_bulge,
        workspace=WORKSPACE,
        baselines={"empty": None, "large": np.array([large_radius])},
        **_bounds("double_integrator", 10.0, max_speed, max_accel),
        **_weights("double_integrator", r1, r2),
    )


# ------------------------------------------------------------- narrow passage


def build_narrow_passage(
    model: str = "double_integrator",
    gap: float = 1.6,
    wall_length: float = 9.0,
    theta0=(np.pi / 4, np.pi / 4),
    angle_bounds=(np.pi / 8, 3 * np.pi / 8),
    narrow=(np.pi / 8 + 0.05, np.pi / 8 + 0.05),
    wide=(np.pi / 3, np.pi / 3),
    starts=((-7.0, -2.4), (-7.5, -0.8), (-7.0, 0.8), (-7.5, 2.4)),
    goals=((5.0, -2.4), (5.0, -0.8), (5.0, 0.8), (5.0, 2.4)),
    horizon: int = 40,
    dt: float = 0.25,
    max_speed: float = 1.4,
    max_accel: float = 2.0,
    max_turn: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    safety=None,
    name: str = "narrow_passage",
) -> ScenarioSpec:
    """A funnel of two walls ending in a gap of fixed width in a vertical wall.

    ``theta = (theta_1, theta_2)`` are the angles of the upper and lower
    funnel walls measured from the passage axis.  Agents start inside the
    funnel and end beyond the wall.  The speed bound keeps one step shorter
    than an agent diameter, so no trajectory can hop over a wall.
    """
    h = 0.5 * gap

    def param_map(th):
        t1, t2 = th[0], th[1]
        zero = 0.0 * t1
        upper = [zero, zero + h, -wall_length * np.cos(t1), h + wall_length * np.sin(t1)]
        lower = [zero, zero - h, -wall_length * np.cos(t2), -h - wall_length * np.sin(t2)]
        top = [zero, zero + h, zero, zero + 10.0]
        bottom = [zero, zero - h, zero, zero - 10.0]
        return np.array(upper + lower + top + bottom)

    templates = tuple(LineBoundary((0.0, 0.0), (1.0, 0.0)) for _ in range(4))
    via = np.array([[-1.5, 0.0], [1.5, 0.0]])
    heading = 0.0
    return ScenarioSpec(
        name=name,
        model=model,
        starts=_rest(model, starts, heading),
        goals=_rest(model, goals, heading),
        horizon=horizon,
        dt=dt,
        env=EnvParams(theta0, angle_bounds[0], angle_bounds[1], names=("theta_1", "theta_2")),
        templates=templates,
        param_map=param_map,
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=1.0)),
        max_speed=max_speed if model == "unicycle" else float(np.sqrt(2) * max_speed),
        init_via=via,
        workspace=WORKSPACE,
        baselines={"narrow": np.array(narrow), "wide": np.array(wide)},
        **_bounds(model, 10.0, max_speed, max_accel, turn=max_turn),
        **_weights(model, r1, r2),
    )


# --------------------------------------------------------------- highway exit


def build_highway_exit(
    half_width: float = 2.0,
    ramp_width: float = 2.5,
    ramp_length: float = 8.0,
    theta0: float = 1.0,
    angle_bounds=(np.pi / 6, 1.4),
    lanes=(-1.2, 0.0, 1.2),
    start_x: float = -8.0,
    goal_depths=(7.0, 5.5, 4.0),
    horizon: int = 40,
    dt: float = 0.25,
    max_speed: float = 1.4,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    safety=None,
    name: str = "highway_exit",
) -> ScenarioSpec:
    """A straight road with an exit ramp leaving its lower edge at angle ``theta``.

    Agents start in parallel lanes and all take the exit.  Goals sit on the
    ramp axis and therefore move with ``theta``.  As in the narrow passage,
    the speed bound keeps every step shorter than an agent diameter.
    """
    hw = half_width
    depths = np.asarray(goal_depths, dtype=float)
    lanes = np.asarray(lanes, dtype=float)

    def _ramp(th):
        d = np.array([np.cos(th), -np.sin(th)])
        mouth = ramp_width / np.sin(th)
        return d, mouth

    def param_map(th):
        t = th[0]
        zero = 0.0 * t
        d, mouth = _ramp(t)
        top = [zero - 10.0, zero + hw, zero + 10.0, zero + hw]
        low_l = [zero - 10.0, zero - hw, zero, zero - hw]
        ramp_l = [zero, zero - hw, ramp_length * d[0], -hw + ramp_length * d[1]]
        ramp_r = [mouth, zero - hw, mouth + ramp_length * d[0], -hw + ramp_length * d[1]]
        low_r = [mouth, zero - hw, zero + 10.0 + mouth, zero - hw]
        return np.array(top + low_l + ramp_l + ramp_r + low_r)

    def task_map(th):
        t = th[0]
        d, mouth = _ramp(t)
        axis0 = np.stack([0.5 * mouth, -hw + 0.0 * t])
        G = np.stack([axis0 + s * d for s in depths])
        S = np.stack([np.stack([start_x + 0.0 * t, y + 0.0 * t]) for y in lanes])
        return np.concatenate([S, 0.0 * S], axis=1), np.concatenate([G, 0.0 * G], axis=1)

    def via(th):
        t = th[0]
        _, mouth = _ramp(t)
        return np.array([[0.5 * mouth, -hw]])

    S0, G0 = task_map(np.array([theta0]))
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=S0,
        goals=G0,
        horizon=horizon,
        dt=dt,
        env=EnvParams([theta0], angle_bounds[0], angle_bounds[1], names=("exit_angle",)),
        templates=tuple(LineBoundary((0.0, 0.0), (1.0, 0.0)) for _ in range(5)),
        param_map=param_map,
        task_map=task_map,
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=float(np.sqrt(2) * max_speed),
        init_via=via,
        workspace=WORKSPACE,
        baselines={"pi/4": np.array([np.pi / 4]), "pi/3": np.array([np.pi / 3])},
        **_bounds("double_integrator", 10.0, max_speed, max_accel),
        **_weights("double_integrator", r1, r2),
    )


# --------------------------------------------------------------- intersection


def _rot(t):
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, -s], [s, c]])


def build_intersection(
    model: str = "double_integrator",
    half_width: float = 2.0,
    arm: float = 9.0,
    theta0: float = np.pi / 2,
    angle_bounds=(np.pi / 6, 5 * np.pi / 6),
    lane: float = 1.0,
    reach: float = 8.0,
    horizon: int = 50,
    dt: float = 0.2,
    max_speed: float = 1.8,
    max_accel: float = 2.0,
    max_turn: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    safety=None,
    name: str = "intersection",
) -> ScenarioSpec:
    """Two straight roads crossing at the origin; the second road is rotated by ``theta``.

    Each road carries two agents in opposite directions (right-hand lanes).
    The eight boundary segments run from the four corners of the crossing
    outward.  Starts and goals on the second road rotate with ``theta``.
    """
    a_sides = (half_width, -half_width)

    def corners(t):
        # corner where road-1 side y = a meets road-2 side n . p = b
        s, c = np.sin(t), np.cos(t)
        out = {}
        for a in a_sides:
            for b in a_sides:
                out[a, b] = np.stack([(a * c - b) / s, a + 0.0 * t])
        return out

    def param_map(th):
        t = th[0]
        e = np.stack([np.cos(t), np.sin(t)])
        C = corners(t)
        segs = []
        for a in a_sides:
            xs = sorted(((C[a, b][0], b) for b in a_sides), key=lambda v: v[0].real)
            lo, hi = C[a, xs[0][1]], C[a, xs[1][1]]
            segs.append(np.concatenate([lo, lo + np.stack([-arm + 0.0 * t, 0.0 * t])]))
            segs.append(np.concatenate([hi, hi + np.stack([arm + 0.0 * t, 0.0 * t])]))
        for b in a_sides:
            ss = sorted(((C[a, b] @ e, a) for a in a_sides), key=lambda v: v[0].real)
            lo, hi = C[ss[0][1], b], C[ss[1][1], b]
            segs.append(np.concatenate([lo, lo - arm * e]))
            segs.append(np.concatenate([hi, hi + arm * e]))
        return np.concatenate(segs)

    local_s = np.array([[-reach, -lane], [reach, lane]])
    local_g = np.array([[reach, -lane], [-reach, lane]])
    heading_local = np.array([0.0, np.pi])

    def task_map(th):
        t = th[0]
        R = _rot(t)
        S = np.concatenate([local_s + 0.0 * t, local_s @ R.T])
        G = np.concatenate([local_g + 0.0 * t, local_g @ R.T])
        if model == "unicycle":
            h = np.concatenate([heading_local + 0.0 * t, heading_local + t])
            z = 0.0 * h
            return (
                np.concatenate([S, h[:, None], z[:, None]], axis=1),
                np.concatenate([G, h[:, None], z[:, None]], axis=1),
            )
        return np.concatenate([S, 0.0 * S], axis=1), np.concatenate([G, 0.0 * G], axis=1)

    S0, G0 = task_map(np.array([theta0]))
    return ScenarioSpec(
        name=name,
        model=model,
        starts=S0,
        goals=G0,
        horizon=horizon,
        dt=dt,
        env=EnvParams([theta0], angle_bounds[0], angle_bounds[1], names=("crossing_angle",)),
        templates=tuple(LineBoundary((0.0, 0.0), (1.0, 0.0)) for _ in range(8)),
        param_map=param_map,
        task_map=task_map,
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=max_speed if model == "unicycle" else float(np.sqrt(2) * max_speed),
        workspace=WORKSPACE,
        baselines={"pi/4": np.array([np.pi / 4]), "3pi/4": np.array([3 * np.pi / 4])},
        **_bounds(model, 10.0, max_speed, max_accel, turn=max_turn),
        **_weights(model, r1, r2),
    )


# ---------------------------------------------------------------------- track


def build_track(
    radii0=(6.0, 7.0, 5.5, 6.5, 6.0, 5.2, 7.0),
    fixed=(0, 1),
    spread: float = 0.2,
    half_width: float = 1.25,
    lane: float = 0.5,
    horizon: int = 40,
    dt: float = 0.5,
    max_rate: float = 0.6,
    max_radial_speed: float = 1.5,
    max_accel: float = 1.0,
    r1: float = 1.0,
    r2: float = 0.1,
    safety=None,
    name: str = "track",
) -> ScenarioSpec:
    """Closed track in polar coordinates; two agents drive one lap in opposite directions.

    ``theta`` holds the radii of the waypoints not listed in ``fixed``, each
    bounded to ``+-spread`` of its initial value.  Goals are the start
    positions one full turn later (angle ``+-2 pi``).
    """
    r0 = np.asarray(radii0, dtype=float)
    fixed_mask = tuple(k in fixed for k in range(r0.size))
    free = np.flatnonzero(~np.array(fixed_mask))
    theta0 = r0[free]

    def param_map(th):
        r = np.array(r0, dtype=th.dtype)
        r[free] = th
        return np.append(r, half_width)

    rc0 = r0[0]  # the waypoint at angle 0 is fixed, so starts do not move with theta
    if not fixed_mask[0]:
        raise ConfigError("the waypoint at angle 0 must be fixed (agents start there)")
    starts = np.array([[rc0 - lane, 0.0, 0.0, 0.0], [rc0 + lane, 0.0, 0.0, 0.0]])
    goals = np.array([[rc0 - lane, 2 * np.pi, 0.0, 0.0], [rc0 + lane, -2 * np.pi, 0.0, 0.0]])
    inf = np.inf
    return ScenarioSpec(
        name=name,
        model="polar_double_integrator",
        starts=starts,
        goals=goals,
        horizon=horizon,
        dt=dt,
        env=EnvParams(theta0, (1 - spread) * theta0, (1 + spread) * theta0, names=tuple(f"radius[{k}]" for k in free)),
        templates=(TrackBoundary(r0, half_width, fixed_mask),),
        param_map=param_map,
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=float(np.hypot(max_radial_speed, max_rate * (r0.max() * (1 + spread) + half_width))),
        metric="distance_ratio",
        workspace=WORKSPACE,
        baselines={"initial": theta0.copy()},
        state_lower=[0.5, -inf, -max_radial_speed, -max_rate],
        state_upper=[inf, inf, max_radial_speed, max_rate],
        control_lower=[-max_accel, -max_accel],
        control_upper=[max_accel, max_accel],
        R1=np.diag([r1, r1, 0.0, 0.0]),
        R2=r2 * np.eye(2),
    )


# ------------------------------------------------------------- small examples


def build_two_obstacle(
    theta0=(0.0, 0.0),
    x_positions=(-1.5, 1.5),
    radius: float = 1.0,
    y_bound: float = 3.0,
    corner: float = 4.0,
    horizon: int = 20,
    dt: float = 0.5,
    max_speed: float = 3.0,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    init_bulge: float = 0.5,
    combiner: str = "sum",
    safety=None,
    name: str = "two_obstacle",
) -> ScenarioSpec:
    """Two agents crossing diagonally past two discs whose y-positions are ``theta``."""
    xs = np.asarray(x_positions, dtype=float)

    def param_map(th):
        return np.array([xs[0] + 0.0 * th[0], th[0], radius + 0.0 * th[0], xs[1] + 0.0 * th[1], th[1], radius + 0.0 * th[1]])

    c = corner
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=_rest("double_integrator", [[-c, -c], [-c, c]]),
        goals=_rest("double_integrator", [[c, c], [c, -c]]),
        horizon=horizon,
        dt=dt,
        env=EnvParams(theta0, -y_bound, y_bound, names=("y_0", "y_1")),
        templates=(Circle((xs[0], 0.0), radius, combiner), Circle((xs[1], 0.0), radius, combiner)),
        param_map=param_map,
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        max_speed=max_speed,
        init_bulge=init_bulge,
        workspace=(-5.0, 5.0, -5.0, 5.0),
        **_bounds("double_integrator", 5.0, max_speed, max_accel),
        **_weights("double_integrator", r1, r2),
    )


def build_toy(
    theta0: float = 0.0,
    theta_bounds=(-3.0, 3.0),
    offset: float = 0.6,
    radius: float = 1.0,
    horizon: int = 10,
    dt: float = 0.5,
    r1: float = 1.0,
    r2: float = 0.1,
    combiner: str = "sum",
    safety=None,
    name: str = "toy",
) -> ScenarioSpec:
    """One agent passing one disc whose x-center is the single parameter."""
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=[[-5.0, offset, 0.0, 0.0]],
        goals=[[5.0, offset, 0.0, 0.0]],
        horizon=horizon,
        dt=dt,
        env=EnvParams([theta0], theta_bounds[0], theta_bounds[1], names=("x_center",)),
        templates=(Circle((0.0, 0.0), radius, combiner),),
        param_map=lambda th: np.concatenate([th, 0.0 * th, radius + 0.0 * th]),
        safety=_safety(safety or dict(w=1.0, eps=0.1, tau=2.5)),
        R1=np.diag([r1, r1, 0.0, 0.0]),
        R2=r2 * np.eye(2),
        workspace=(-6.0, 6.0, -6.0, 6.0),
    )


def build_empty(
    start=(0.0, 0.0),
    goal=(3.0, 0.0),
    horizon: int = 10,
    dt: float = 0.5,
    max_speed: float = 3.0,
    max_accel: float = 2.0,
    r1: float = 1.0,
    r2: float = 0.1,
    r_vel: float = 0.0,
    name: str = "empty",
) -> ScenarioSpec:
    """A single agent and no obstacles; ``theta`` is a dummy scalar.

    ``r_vel`` weights the velocity error to the (resting) goal state; with
    pure position tracking the agent overshoots the goal and backs up.
    """
    weights = _weights("double_integrator", r1, r2)
    weights["R1"] = weights["R1"] + np.diag([0.0, 0.0, r_vel, r_vel])
    return ScenarioSpec(
        name=name,
        model="double_integrator",
        starts=_rest("double_integrator", [start]),
        goals=_rest("double_integrator", [goal]),
        horizon=horizon,
        dt=dt,
        env=EnvParams([0.0], -1.0, 1.0, names=("unused",)),
        max_speed=max_speed,
        workspace=(-5.0, 5.0, -5.0, 5.0),
        **_bounds("double_integrator", 10.0, max_speed, max_accel),
        **weights,
    )


BUILDERS = {
    "warehouse": build_warehouse,
    "warehouse_mini": build_warehouse_mini,
    "warehouse_stochastic": build_warehouse_stochastic,
    "roundabout": build_roundabout,
    "narrow_passage": build_narrow_passage,
    "highway_exit": build_highway_exit,
    "intersection": build_intersection,
    "track": build_track,
    "two_obstacle": build_two_obstacle,
    "toy": build_toy,
    "empty": build_empty,
}


def build(name: str, **params) -> ScenarioSpec:
    try:
        fn = BUILDERS[name]
    except KeyError:
        raise ConfigError(f"unknown scenario {name!r}; known: {sorted(BUILDERS)}") from None
    return fn(**params)

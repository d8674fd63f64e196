import dataclasses

import numpy as np
import pytest

from conav.bilevel import safety_report
from conav.errors import InfeasibleTaskError
from conav.scenarios import BUILDERS, build, collision_counts, compute_metrics, sample_task
from conav.trajopt import TrajectoryProblem, solve

from . import oracles


@pytest.mark.parametrize("name", sorted(BUILDERS))
def test_every_builder_passes_its_audit(name):
    sc = build(name)
    sc.audit()
    for th in sc.baselines.values():
        if th is not None:
            sc.audit(th)


def test_warehouse_counts():
    sc = build("warehouse")
    assert (sc.n_obstacles, sc.env.dim, sc.agent_radius) == (9, 18, 0.3)
    assert all(ob.radius == 1.5 for ob in sc.obstacles(sc.theta0))
    assert (sc.safety.w, sc.safety.eps, sc.safety.tau) == (1.0, 0.1, 2.5)
    assert build("warehouse", n_agents=8).n_agents == 8
    grid = sc.baselines["grid"].reshape(9, 2)
    assert sorted(set(grid[:, 0])) == sorted(set(grid[:, 1])) and len(set(grid[:, 0])) == 3


def test_warehouse_seeds_give_admissible_layouts():
    for seed in range(20):
        build("warehouse", seed=seed).audit()


def test_roundabout():
    sc = build("roundabout")
    assert sc.n_agents == 12 and sc.env.dim == 1
    np.testing.assert_allclose(sc.starts[:, :2], -sc.goals[:, :2], atol=1e-12)
    empty = sc.without_obstacles()
    assert empty.n_obstacles == 0
    p = TrajectoryProblem(empty)
    X = np.repeat(empty.starts[:, None], empty.horizon + 1, axis=1)
    rep = safety_report(p, p.pack(X, np.zeros((12, empty.horizon, 2))))
    assert rep.M == 0 and rep.p_obstacle == 0.0 and rep.s_obstacle == 1.0


def test_narrow_passage():
    sc = build("narrow_passage")
    assert sc.safety.tau == 1.0 and sc.env.dim == 2
    for th in sc.baselines.values():
        assert th[0] == th[1]


def test_highway_and_intersection_baselines():
    hw = build("highway_exit")
    np.testing.assert_allclose(sorted(v[0] for v in hw.baselines.values()), [np.pi / 4, np.pi / 3])
    it = build("intersection")
    np.testing.assert_allclose(sorted(v[0] for v in it.baselines.values()), [np.pi / 4, 3 * np.pi / 4])
    dS, dG = it.task_jacobian(it.theta0)
    assert np.any(dS) and np.any(dG)


def test_track():
    sc = build("track")
    ob = sc.obstacles(sc.theta0)[0]
    assert ob.half_width == 1.25 and sc.env.dim == 5 and len(ob.waypoint_radii) == 7 and sum(ob.fixed_mask) == 2
    np.testing.assert_allclose(sc.env.upper, 1.2 * sc.theta0)
    np.testing.assert_allclose(sc.env.lower, 0.8 * sc.theta0)
    assert sc.metric == "distance_ratio"


def test_sample_task():
    S, G = sample_task(7)
    S2, G2 = sample_task(7)
    assert np.array_equal(S, S2) and np.array_equal(G, G2)
    assert not np.array_equal(sample_task(8)[0], S)
    # two left-to-right agents and two top-to-bottom
    assert np.all(S[:2, 0] == -9.0) and np.all(G[:2, 0] == 9.0)
    assert np.all(S[2:, 1] == 9.0) and np.all(G[2:, 1] == -9.0)
    slots = np.linspace(-9, 9, 19)
    assert np.all(np.isin(S[:2, 1], slots)) and np.all(np.isin(S[2:, 0], slots))


# ---------------------------------------------------------------- metrics


def _line(a, b, n):
    s = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - s) * np.asarray(a) + s * np.asarray(b)


def _states(P):
    """Double-integrator states with velocity columns from differences."""
    V = np.zeros_like(P)
    V[:, :-1] = np.diff(P, axis=1)
    return np.concatenate([P, V], axis=-1)


def test_spl_straight_line_is_one():
    sc = build("empty", start=(0.0, 0.0), goal=(3.0, 0.0), horizon=6)
    X = _states(_line((0, 0), (3, 0), 7)[None])
    assert compute_metrics(sc, sc.theta0, X).spl == pytest.approx(1.0)


def test_spl_one_of_two_fails():
    sc = build("two_obstacle").without_obstacles()
    S, G = sc.task(sc.theta0)
    T1 = sc.horizon + 1
    P = np.stack([_line(S[0, :2], G[0, :2], T1), _line(S[1, :2], S[1, :2] + [1.0, 0.0], T1)])
    assert compute_metrics(sc, sc.theta0, _states(P)).spl == pytest.approx(0.5)


def test_spl_detour_ratio():
    sc = build("empty", start=(0.0, 0.0), goal=(3.0, 0.0), horizon=3)
    P = np.array([[[0.0, 0.0], [0.0, 0.5], [3.0, 0.5], [3.0, 0.0]]])
    m = compute_metrics(sc, sc.theta0, _states(P))
    assert m.path_lengths[0] == pytest.approx(4.0)
    assert m.spl == pytest.approx(0.75)


def test_metrics_match_brute_force(rng):
    sc = build("two_obstacle")
    obs = sc.obstacles(sc.theta0)
    circles = [(o.center[0], o.center[1], o.radius) for o in obs]
    S, G = sc.task(sc.theta0)
    for _ in range(20):
        P = rng.uniform(-4, 4, (2, sc.horizon + 1, 2))
        P[:, -1] = G[:, :2] + rng.uniform(-0.08, 0.08, (2, 2)) * rng.integers(0, 2)
        X = np.concatenate([P, rng.uniform(-1, 1, P.shape)], axis=-1)
        m = compute_metrics(sc, sc.theta0, X)
        coll = oracles.collisions(P.tolist(), circles, sc.agent_radius)
        assert list(collision_counts(P, obs, sc.agent_radius)) == coll
        assert m.num_coll == pytest.approx(sum(coll) / 2)
        assert m.spl == pytest.approx(oracles.spl(P.tolist(), S[:, :2].tolist(), G[:, :2].tolist(), circles, sc.agent_radius), abs=1e-12)
        assert m.pct_speed == pytest.approx(oracles.pct_speed(X[..., 2:].tolist(), sc.max_speed), abs=1e-12)


def test_collision_runs_counted_once():
    from conav.geometry import Circle

    ob = [Circle((0.0, 0.0), 1.0)]
    P = np.array([[[0.0, 0.0], [0.1, 0.0], [5.0, 0.0], [0.0, 0.2], [5.0, 5.0]]])
    assert collision_counts(P, ob, 0.3)[0] == 2


# ---------------------------------------------------------------- isometry


def _rot(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]])


def _rotated(sc, Q, shift, kind):
    def pm(th):
        q = np.asarray(sc.param_map(th), dtype=float)
        if kind == "circle":
            q = q.reshape(-1, 3).copy()
            q[:, :2] = q[:, :2] @ Q.T + shift
        else:
            q = q.reshape(-1, 2) @ Q.T + shift
        return q.ravel()

    S, G = sc.task(sc.theta0)

    def move(Z):
        Z = Z.copy()
        Z[:, :2] = Z[:, :2] @ Q.T + shift
        Z[:, 2:4] = Z[:, 2:4] @ Q.T
        return Z

    return dataclasses.replace(sc, starts=move(S), goals=move(G), task_map=None, param_map=pm, env=sc.env.with_theta(sc.theta0))


@pytest.mark.parametrize("name, kind", [("warehouse_mini", "circle"), ("intersection", "line")])
def test_isometry_invariance(name, kind):
    sc = build(name)
    p = TrajectoryProblem(sc)
    sol = solve(p)
    X, _ = p.trajectories(sol)
    Q, shift = _rot(0.7), np.array([1.5, -2.0])
    sc2 = _rotated(sc, Q, shift, kind)
    X2 = X.copy()
    X2[..., :2] = X[..., :2] @ Q.T + shift
    X2[..., 2:4] = X[..., 2:4] @ Q.T
    p2 = TrajectoryProblem(sc2, check_task=False)
    F1 = safety_report(p, p.pack(X, p.split(sol.z)[1])).F
    F2 = safety_report(p2, p2.pack(X2, p.split(sol.z)[1])).F
    assert F2 == pytest.approx(F1, abs=1e-9)
    m1 = compute_metrics(sc, sc.theta0, X)
    m2 = compute_metrics(sc2, sc2.theta0, X2)
    assert m2.spl == pytest.approx(m1.spl, abs=1e-9)
    assert m2.pct_speed == pytest.approx(m1.pct_speed, abs=1e-9)


def test_inadmissible_theta_rejected():
    sc = build("warehouse_mini")
    with pytest.raises(InfeasibleTaskError):
        sc.audit(sc.env.upper + 1.0)

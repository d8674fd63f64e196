import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conav.geometry import Circle, LineBoundary
from conav.safety import (
    SafetyParams,
    are_disjoint,
    collision_zone,
    evaluate,
    grad_F,
    metric_F,
    obstacle_potential,
    union_residuals,
    unsafety_mass,
)

from . import oracles

SP = SafetyParams(w=1.0, eps=0.1, tau=2.5)


def test_potential_examples():
    assert obstacle_potential(2.501, SP) == 0.0
    assert obstacle_potential(0.0, SP) == pytest.approx(10.0)
    assert obstacle_potential(1.9, SP) == pytest.approx(0.5)


def test_invalid_params():
    with pytest.raises(ValueError):
        SafetyParams(w=0.0)
    with pytest.raises(ValueError):
        SafetyParams(tau=-1.0)


def test_fully_safe_and_fully_unsafe():
    far = np.array([[[50.0, 50.0], [50.0, 51.0]], [[-50.0, -50.0], [-50.0, -51.0]]])
    obs = [Circle((0, 0), 1.0)]
    assert metric_F(far, obs, SP, 0.3) == pytest.approx(1.0)
    # both agents sit on the obstacle and on each other
    bad = np.zeros((2, 2, 2))
    assert metric_F(bad, obs, SP, 0.3) == pytest.approx(0.0)


def test_no_obstacles_branch():
    P = np.array([[[0.0, 0.0], [1.0, 0.0]]])
    rep = evaluate(P, [], SP, 0.3)
    assert rep.p_obstacle == 0.0 and rep.s_obstacle == 1.0 and rep.F == pytest.approx(1.0)


def test_collision_zone():
    a = np.array([[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]])
    b = np.array([[10.0, 0.0], [2.0, 0.0], [1.0, 0.0]])
    assert collision_zone(a, b, SP, 0.3) == [1, 2]


@given(st.integers(1, 4), st.integers(0, 3), st.integers(2, 5), st.integers(0, 10_000))
def test_report_invariants(n, m, t1, seed):
    rng = np.random.default_rng(seed)
    P = rng.uniform(-5, 5, (n, t1, 2))
    obs = [Circle(rng.uniform(-5, 5, 2), rng.uniform(0.5, 2)) for _ in range(m)]
    rep = evaluate(P, obs, SP, 0.3)
    for v in (*rep.per_agent_obstacle, *rep.per_agent_pair, rep.p_obstacle, rep.p_agents):
        assert 0.0 <= v <= 1.0
    assert rep.s_obstacle == 1.0 - rep.p_obstacle and rep.s_agents == 1.0 - rep.p_agents
    assert rep.P == pytest.approx(rep.p_obstacle * m + rep.p_agents * (n - 1), abs=1e-14)
    if m + n - 1 > 0:
        assert rep.P * rep.R + rep.S * rep.R == pytest.approx(1.0, abs=1e-12)
    assert 0.0 <= rep.F <= 1.0


def _fd_positions(P, obs, R=None, h=1e-6):
    g = np.zeros_like(P)
    for idx in np.ndindex(P.shape):
        e = np.zeros_like(P)
        e[idx] = h
        g[idx] = (metric_F(P + e, obs, SP, 0.3, R) - metric_F(P - e, obs, SP, 0.3, R)) / (2 * h)
    return g


def test_grad_F_matches_fd(rng):
    for _ in range(10):
        P = rng.uniform(-3, 3, (3, 4, 2))
        obs = [Circle(rng.uniform(-3, 3, 2), 1.0), LineBoundary((-4.0, -3.5), (4.0, -3.5))]
        g = grad_F(P, obs, SP, 0.3)
        fd = _fd_positions(P, obs)
        assert np.max(np.abs(g.positions - fd)) <= 1e-5 * max(np.max(np.abs(fd)), 1e-8)
        q = np.concatenate([ob.params for ob in obs])

        def F_of_q(qq):
            o = [obs[0].with_params(qq[:3]), obs[1].with_params(qq[3:])]
            return metric_F(P, o, SP, 0.3)

        fdq = np.array([(F_of_q(q + h) - F_of_q(q - h)) / 2e-6 for h in np.eye(q.size) * 1e-6])
        assert np.max(np.abs(g.obstacle_params - fdq)) <= 1e-5 * max(np.max(np.abs(fdq)), 1e-8)


def test_grad_sign_and_hand_magnitude():
    # one agent, one circle, agent on the +x side at distance d at step 0 only
    d, T1 = 1.0, 3
    P = np.array([[[1.0 + 0.3 + d, 0.0], [20.0, 0.0], [20.0, 1.0]]])
    obs = [Circle((0.0, 0.0), 1.0)]
    g = grad_F(P, obs, SP, 0.3)
    R = 1.0 / (1 + 1 - 1)
    expected = R * 1 * (SP.eps / SP.w) * SP.w / (d + SP.eps) ** 2 / (1 * T1)
    assert g.positions[0, 0, 0] > 0  # moving away raises F
    assert g.positions[0, 0, 0] == pytest.approx(expected, rel=1e-12)
    assert np.all(g.positions[0, 1:] == 0.0)


def test_grad_translation_antisymmetry(rng):
    P = rng.uniform(-2, 2, (1, 3, 2))
    obs = [Circle((0.5, 0.5), 0.8)]
    g = grad_F(P, obs, SP, 0.3)
    np.testing.assert_allclose(g.obstacle_params[:2], -g.positions.sum(axis=(0, 1)), atol=1e-14)


def test_grad_far_is_zero():
    P = np.array([[[50.0, 50.0], [51.0, 50.0]]])
    g = grad_F(P, [Circle((0, 0), 1.0)], SP, 0.3)
    assert not np.any(g.positions) and not np.any(g.obstacle_params)


def test_R_scaling():
    P = np.array([[[1.5, 0.0], [2.0, 0.5]], [[2.5, 1.0], [3.0, 1.0]]])
    obs = [Circle((0, 0), 1.0)]
    g1 = grad_F(P, obs, SP, 0.3, R=0.5)
    g2 = grad_F(P, obs, SP, 0.3, R=1.5)
    np.testing.assert_allclose(g2.positions, 3 * g1.positions, rtol=1e-14)


def test_null_union_identity(rng):
    A = rng.uniform(-5, 5, (3, 4, 2))
    obs = [Circle((0, 0), 1.0)]
    lhs, rhs = union_residuals([A, np.zeros((0, 4, 2))], obs, SP, 0.3)
    assert lhs == pytest.approx(rhs, abs=1e-12)
    assert lhs == pytest.approx(3 * unsafety_mass(A, obs, SP, 0.3), abs=1e-12)


@given(st.integers(0, 100_000))
def test_disjoint_additivity_and_subadditivity(seed):
    rng = np.random.default_rng(seed)
    obs = [Circle((0.0, 0.0), 1.5), Circle((3.0, -4.0), 1.0)]
    # disjoint: far-apart bands
    parts = [rng.uniform(-1, 1, (rng.integers(1, 4), 4, 2)) + [30.0 * k, 0.0] for k in range(3)]
    assert are_disjoint(parts, SP, 0.3)
    lhs, rhs = union_residuals(parts, obs, SP, 0.3)
    assert abs(lhs - rhs) <= 1e-12
    # arbitrary overlapping systems
    parts = [rng.uniform(-3, 3, (rng.integers(0, 4), 4, 2)) for _ in range(3)]
    lhs, rhs = union_residuals(parts, obs, SP, 0.3)
    assert rhs <= lhs + 1e-12
    for A in parts:
        assert unsafety_mass(A, obs, SP, 0.3) >= 0.0


def test_matches_brute_force(rng):
    for _ in range(20):
        n, m, t1 = rng.integers(1, 5), rng.integers(0, 4), rng.integers(2, 6)
        P = rng.uniform(-4, 4, (n, t1, 2))
        circles = [(*rng.uniform(-4, 4, 2), rng.uniform(0.5, 2)) for _ in range(m)]
        rep = evaluate(P, [Circle(c[:2], c[2]) for c in circles], SP, 0.3)
        po, pa, F = oracles.unsafety_masses(P.tolist(), circles, 0.3)
        assert abs(rep.p_obstacle - po) <= 1e-12
        assert abs(rep.p_agents - pa) <= 1e-12
        assert abs(rep.F - F) <= 1e-12

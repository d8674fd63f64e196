import numpy as np
import pytest

from conav.errors import ConavError
from conav.scenarios import build
from conav.trajopt import TrajectoryProblem, audit, kkt_norm, kkt_residual, solve

from . import oracles


def _ops(problem):
    return problem.n_dyn, problem.N * problem.nx, problem.n_obs, problem.n_pair


def test_counts_single_agent_no_obstacles():
    p = TrajectoryProblem(build("empty", horizon=1))
    n_dyn, n_init, n_obs, n_pair = _ops(p)
    assert (n_dyn // p.nx, n_init // p.nx, n_obs, n_pair) == (1, 1, 0, 0)


def test_counts_two_agents_one_obstacle():
    sc = build("two_obstacle", horizon=2)
    # drop one disc: assemble with a single-obstacle scenario
    from conav.geometry import Circle

    sc1 = build("toy", horizon=2)
    p1 = TrajectoryProblem(sc1)
    assert p1.n_obs == 1 * 3 * 1 and p1.n_pair == 0
    p = TrajectoryProblem(sc)
    assert p.n_obs == 2 * 3 * 2 and p.n_pair == 3 * 1
    assert isinstance(sc1.templates[0], Circle)


def test_infeasible_task_raises():
    with pytest.raises(ConavError):
        TrajectoryProblem(build("toy", offset=0.0, theta0=-5.0 + 0.5, theta_bounds=(-6.0, 6.0)))


def test_objective_examples():
    p = TrajectoryProblem(build("empty", start=(0.0, 0.0), goal=(0.0, 0.0), horizon=3))
    X = np.zeros((1, 4, 4))
    U = np.zeros((1, 3, 2))
    assert p.objective(p.pack(X, U)) == 0.0
    p = TrajectoryProblem(build("empty", start=(0.0, 0.0), goal=(1.0, 0.0), horizon=1))
    X = np.array([[[1.0, 0, 0, 0], [0.0, 0, 0, 0]]])
    assert p.objective(p.pack(X, np.zeros((1, 1, 2)))) == pytest.approx(1.0)


def test_objective_matches_loop_oracle(rng):
    sc = build("two_obstacle")
    p = TrajectoryProblem(sc)
    for _ in range(5):
        z = rng.normal(size=p.n)
        X, U = p.split(z)
        ref = oracles.lq_objective(X.tolist(), U.tolist(), p.G.tolist(), sc.R1.tolist(), sc.R2.tolist())
        assert p.objective(z) == pytest.approx(ref, rel=1e-12)


def test_rest_at_goal_is_optimal():
    p = TrajectoryProblem(build("empty", start=(0.0, 0.0), goal=(0.0, 0.0)))
    sol = solve(p)
    assert sol.converged
    _, U = p.trajectories(sol)
    assert np.max(np.abs(U)) <= 1e-6
    assert p.objective(sol.z) <= 1e-10


def test_lq_tracking_matches_dense_kkt():
    sc = build("empty", start=(0.0, 0.0), goal=(1.0, 0.0))
    p = TrajectoryProblem(sc)
    sol = solve(p)
    assert sol.converged
    X, U = p.trajectories(sol)
    Xo, Uo = oracles.lq_solution(p.S[0], p.G[0], p.T, p.dt, sc.R1, sc.R2)
    # the oracle ignores the box: it must be strictly inside it for the comparison to hold
    assert np.all(np.abs(Uo) < sc.control_upper[0] - 0.1)
    assert np.all(np.abs(Xo[:, 2:]) < sc.state_upper[2] - 0.1)
    np.testing.assert_allclose(X[0], Xo, atol=1e-6)
    np.testing.assert_allclose(U[0], Uo, atol=1e-6)


def test_kkt_residual_zero_at_algebraic_optimum():
    sc = build("empty", start=(0.0, 0.0), goal=(1.0, 0.0), max_speed=1e3, max_accel=1e3)
    p = TrajectoryProblem(sc)
    sol = solve(p)
    Xo, Uo = oracles.lq_solution(p.S[0], p.G[0], p.T, p.dt, sc.R1, sc.R2)
    z = p.pack(Xo[None], Uo[None])
    # equality multipliers from the least-squares stationarity fit
    JE = p.eq_jac(z).toarray()
    lam = np.linalg.lstsq(JE.T, -p.objective_grad(z), rcond=None)[0]
    C = kkt_residual(p, sol, z=z, lam=lam, w=np.zeros(p.n_in))
    assert np.max(np.abs(C)) <= 1e-10


@pytest.fixture(scope="module")
def mini():
    sc = build("warehouse_mini")
    p = TrajectoryProblem(sc)
    return sc, p, solve(p)


def test_warehouse_mini_feasible(mini):
    sc, p, sol = mini
    assert sol.converged
    assert kkt_norm(p, sol) <= 1e-6
    rep = audit(p, sol)
    assert rep.passed, rep.to_text()
    assert np.all(p.ineq(sol.z) <= 1e-8)
    P = p.positions(sol)
    circles = [(ob.center[0], ob.center[1], ob.radius) for ob in p.obstacles]
    assert sum(oracles.collisions(P.tolist(), circles, sc.agent_radius)) == 0


def test_duals_and_complementarity(mini):
    _, p, sol = mini
    assert np.all(sol.w >= 0.0)
    g = p.ineq(sol.z)
    assert np.max(np.minimum(sol.w, -g)) <= 1e-6


def test_kkt_perturbation_detected(mini):
    _, p, sol = mini
    z = sol.z.copy()
    z[p.ix[0, 3, 0]] += 1e-2
    C = kkt_residual(p, sol, z=z)
    assert np.max(np.abs(C)) > 1e-6


def test_warm_start_few_outer_iterations(mini):
    _, p, sol = mini
    again = solve(p, init=sol)
    assert again.converged
    assert again.outer_iterations <= 3


def test_deterministic(mini):
    _, p, sol = mini
    again = solve(TrajectoryProblem(p.scenario))
    assert np.array_equal(again.z, sol.z)


def test_merit_nonincreasing_within_barrier_stage(mini):
    _, p, sol = mini
    log = [r for r in sol.log if r.primal_inf <= 1e-8]
    for a, b in zip(log, log[1:]):
        if a.mu == b.mu and np.isfinite(a.merit) and np.isfinite(b.merit):
            assert b.merit <= a.merit + 1e-9 * max(1.0, abs(a.merit))


def test_max_iter_reports_nonconverged():
    from conav.trajopt import IpmOptions

    p = TrajectoryProblem(build("warehouse_mini"))
    sol = solve(p, options=IpmOptions(max_iter=3), retry_bulges=())
    assert not sol.converged and sol.status != "converged"

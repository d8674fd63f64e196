import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conav.dynamics import (
    Acceleration2D,
    DoubleIntegrator2D,
    DoubleIntegratorState,
    PolarControl,
    PolarDoubleIntegrator,
    PolarState,
    Unicycle,
    UnicycleControl,
    UnicycleState,
    get_model,
    step,
    step_jacobians,
)
from conav.errors import ModelError

MODELS = [DoubleIntegrator2D(), Unicycle(), PolarDoubleIntegrator()]


def fd_jac(f, x, h=1e-6):
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((f(x + e) - f(x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def test_di_rest_is_fixed_point():
    s = step(DoubleIntegratorState((0, 0), (0, 0)), Acceleration2D((0, 0)), 0.1)
    assert s == DoubleIntegratorState((0.0, 0.0), (0.0, 0.0))


def test_di_uniform_motion():
    s = step(DoubleIntegratorState((0, 0), (1, 0)), Acceleration2D((0, 0)), 0.1)
    np.testing.assert_allclose(s.p, (0.1, 0.0))
    np.testing.assert_allclose(s.v, (1.0, 0.0))


def test_di_zero_order_hold():
    # p' = p + v dt + u dt^2 / 2, v' = v + u dt
    s = step(DoubleIntegratorState((1, 2), (3, -1)), Acceleration2D((2, 4)), 0.5)
    np.testing.assert_allclose(s.p, (1 + 1.5 + 0.25, 2 - 0.5 + 0.5))
    np.testing.assert_allclose(s.v, (4.0, 1.0))


def test_unicycle_euler_step():
    s = step(UnicycleState((0, 0), 0.0, 1.0), UnicycleControl(0.0, 0.0), 0.1)
    np.testing.assert_allclose(s.p, (0.1, 0.0))
    assert s.heading == 0.0 and s.speed == 1.0


def test_di_jacobian_blocks():
    A, B = step_jacobians(DoubleIntegratorState((0.3, 1), (2, 2)), Acceleration2D((1, 1)), 0.1)
    np.testing.assert_allclose(A[0:2, 2:4], 0.1 * np.eye(2))
    np.testing.assert_allclose(B[2:4], 0.1 * np.eye(2))


def test_unicycle_heading_jacobian():
    A, _ = step_jacobians(UnicycleState((0, 0), 0.0, 1.0), UnicycleControl(0.0, 0.0), 0.1)
    assert A[1, 2] == pytest.approx(0.1)


def test_variant_mismatch():
    with pytest.raises(ModelError):
        step(UnicycleState((0, 0), 0.0, 1.0), Acceleration2D((0, 0)), 0.1)
    with pytest.raises(ModelError):
        step(PolarState(1, 0, 0, 0), UnicycleControl(0, 0), 0.1)


def test_bad_dt_and_model_name():
    with pytest.raises(ModelError):
        step(DoubleIntegratorState((0, 0), (0, 0)), Acceleration2D((0, 0)), 0.0)
    with pytest.raises(ModelError):
        get_model("bicycle")


def test_polar_step_runs():
    s = step(PolarState(6.0, 0.0, 0.0, 0.2), PolarControl(0.0, 0.0), 0.5)
    assert s.theta == pytest.approx(0.1)


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.name)
def test_jacobians_match_fd_on_100_samples(model, rng):
    for _ in range(100):
        x = rng.uniform(-2, 2, model.nx)
        if model.name == "polar_double_integrator":
            x[0] = rng.uniform(3, 8)
        u = rng.uniform(-2, 2, model.nu)
        dt = rng.uniform(0.05, 0.5)
        A, B = model.jacobians(x, u, dt)
        Afd = fd_jac(lambda xx: model.step(xx, u, dt), x)
        Bfd = fd_jac(lambda uu: model.step(x, uu, dt), u)
        scale = max(np.max(np.abs(Afd)), 1e-8)
        assert np.max(np.abs(A[0] - Afd)) / scale <= 1e-6
        assert np.max(np.abs(B[0] - Bfd)) / max(np.max(np.abs(Bfd)), 1e-8) <= 1e-6


vec4 = st.lists(st.floats(-5, 5), min_size=4, max_size=4)
vec2 = st.lists(st.floats(-5, 5), min_size=2, max_size=2)


@given(vec4, vec4, vec2, vec2, st.floats(-2, 2))
def test_di_affine(s1, s2, u1, u2, a):
    m = DoubleIntegrator2D()
    b = 1.0 - a
    s1, s2, u1, u2 = map(np.array, (s1, s2, u1, u2))
    lhs = m.step(a * s1 + b * s2, a * u1 + b * u2, 0.2)
    rhs = a * m.step(s1, u1, 0.2) + b * m.step(s2, u2, 0.2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


@given(vec4, vec4, vec2, vec2)
def test_di_jacobians_constant(s1, s2, u1, u2):
    m = DoubleIntegrator2D()
    A1, B1 = m.jacobians(np.array(s1), np.array(u1), 0.3)
    A2, B2 = m.jacobians(np.array(s2), np.array(u2), 0.3)
    assert np.array_equal(A1, A2) and np.array_equal(B1, B2)

"""Discrete-time agent models.

Each model maps ``(x, u) -> x'`` for a fixed step ``dt`` and is vectorized
over a leading batch axis so the transcription can evaluate all agents and
time steps at once.  Besides the step and its Jacobians, a model provides the
curvature of the step contracted with a multiplier vector (needed by the
Lagrangian Hessian) and the map from state to planar position.

The typed state/control records at the bottom are the user-facing entry
point (:func:`step`, :func:`step_jacobians`); the transcription works on the
flat vectors directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError


def _check_dt(dt):
    if not dt > 0:
        raise ModelError(f"dt must be positive, got {dt}")


class DoubleIntegrator2D:
    """Planar point mass, state ``(px, py, vx, vy)``, control ``(ax, ay)``.

    Integrated exactly under zero-order hold, so the step is linear.
    """

    name = "double_integrator"
    linear = True
    linear_position = True
    nx = 4
    nu = 2
    state_labels = ("x", "y", "vx", "vy")
    control_labels = ("ux", "uy")

    def matrices(self, dt):
        A = np.eye(4)
        A[0, 2] = A[1, 3] = dt
        B = np.zeros((4, 2))
        B[0, 0] = B[1, 1] = 0.5 * dt**2
        B[2, 0] = B[3, 1] = dt
        return A, B

    def step(self, x, u, dt):
        _check_dt(dt)
        A, B = self.matrices(dt)
        return np.asarray(x) @ A.T + np.asarray(u) @ B.T

    def jacobians(self, x, u, dt):
        _check_dt(dt)
        A, B = self.matrices(dt)
        x = np.atleast_2d(x)
        k = len(x)
        return np.broadcast_to(A, (k, 4, 4)).copy(), np.broadcast_to(B, (k, 4, 2)).copy()

    def hessian_contract(self, x, u, dt, lam):
        k = len(np.atleast_2d(x))
        return np.zeros((k, 6, 6))

    def position(self, x):
        return np.asarray(x)[..., 0:2]

    def position_jacobian(self, x):
        k = len(np.atleast_2d(x))
        J = np.zeros((k, 2, 4))
        J[:, 0, 0] = J[:, 1, 1] = 1.0
        return J

    def position_hessian_contract(self, x, w):
        return np.zeros((len(np.atleast_2d(x)), 4, 4))

    def speed(self, x):
        x = np.asarray(x)
        return np.hypot(x[..., 2], x[..., 3])

    def rest_state(self, p):
        return np.array([p[0], p[1], 0.0, 0.0])


class Unicycle:
    """Kinematic unicycle, state ``(x, y, heading, speed)``, control ``(accel, turn_rate)``.

    Forward Euler.
    """

    name = "unicycle"
    linear = False
    linear_position = True
    nx = 4
    nu = 2
    state_labels = ("x", "y", "heading", "speed")
    control_labels = ("accel", "turn_rate")

    def step(self, x, u, dt):
        _check_dt(dt)
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        psi, v = x[..., 2], x[..., 3]
        out = x.copy()
        out[..., 0] += v * np.cos(psi) * dt
        out[..., 1] += v * np.sin(psi) * dt
        out[..., 2] += u[..., 1] * dt
        out[..., 3] += u[..., 0] * dt
        return out

    def jacobians(self, x, u, dt):
        _check_dt(dt)
        x = np.atleast_2d(x)
        k = len(x)
        psi, v = x[:, 2], x[:, 3]
        c, s = np.cos(psi), np.sin(psi)
        A = np.broadcast_to(np.eye(4), (k, 4, 4)).copy()
        A[:, 0, 2] = -v * s * dt
        A[:, 0, 3] = c * dt
        A[:, 1, 2] = v * c * dt
        A[:, 1, 3] = s * dt
        B = np.zeros((k, 4, 2))
        B[:, 2, 1] = dt
        B[:, 3, 0] = dt
        return A, B

    def hessian_contract(self, x, u, dt, lam):
        """``sum_k lam_k * d2 step_k / d(x, u)^2`` for each batch entry."""
        x = np.atleast_2d(x)
        lam = np.atleast_2d(lam)
        psi, v = x[:, 2], x[:, 3]
        c, s = np.cos(psi), np.sin(psi)
        H = np.zeros((len(x), 6, 6))
        H[:, 2, 2] = (-lam[:, 0] * v * c - lam[:, 1] * v * s) * dt
        off = (-lam[:, 0] * s + lam[:, 1] * c) * dt
        H[:, 2, 3] = off
        H[:, 3, 2] = off
        return H

    def position(self, x):
        return np.asarray(x)[..., 0:2]

    def position_jacobian(self, x):
        k = len(np.atleast_2d(x))
        J = np.zeros((k, 2, 4))
        J[:, 0, 0] = J[:, 1, 1] = 1.0
        return J

    def position_hessian_contract(self, x, w):
        return np.zeros((len(np.atleast_2d(x)), 4, 4))

    def speed(self, x):
        return np.abs(np.asarray(x)[..., 3])

    def rest_state(self, p, heading=0.0):
        return np.array([p[0], p[1], heading, 0.0])


class PolarDoubleIntegrator:
    """Double integrator in polar coordinates.

    State ``(rho, theta, rho_dot, theta_dot)``, control ``(rho_ddot, theta_ddot)``,
    forward Euler.  The step is linear; the position map ``rho * (cos, sin)``
    is not.
    """

    name = "polar_double_integrator"
    linear = True
    linear_position = False
    nx = 4
    nu = 2
    state_labels = ("rho", "theta", "rho_dot", "theta_dot")
    control_labels = ("rho_ddot", "theta_ddot")

    def matrices(self, dt):
        A = np.eye(4)
        A[0, 2] = A[1, 3] = dt
        B = np.zeros((4, 2))
        B[2, 0] = B[3, 1] = dt
        return A, B

    def step(self, x, u, dt):
        _check_dt(dt)
        A, B = self.matrices(dt)
        return np.asarray(x) @ A.T + np.asarray(u) @ B.T

    def jacobians(self, x, u, dt):
        _check_dt(dt)
        A, B = self.matrices(dt)
        k = len(np.atleast_2d(x))
        return np.broadcast_to(A, (k, 4, 4)).copy(), np.broadcast_to(B, (k, 4, 2)).copy()

    def hessian_contract(self, x, u, dt, lam):
        return np.zeros((len(np.atleast_2d(x)), 6, 6))

    def position(self, x):
        x = np.asarray(x)
        rho, th = x[..., 0], x[..., 1]
        return np.stack([rho * np.cos(th), rho * np.sin(th)], axis=-1)

    def position_jacobian(self, x):
        x = np.atleast_2d(x)
        rho, th = x[:, 0], x[:, 1]
        c, s = np.cos(th), np.sin(th)
        J = np.zeros((len(x), 2, 4))
        J[:, 0, 0], J[:, 0, 1] = c, -rho * s
        J[:, 1, 0], J[:, 1, 1] = s, rho * c
        return J

    def position_hessian_contract(self, x, w):
        x = np.atleast_2d(x)
        w = np.atleast_2d(w)
        rho, th = x[:, 0], x[:, 1]
        c, s = np.cos(th), np.sin(th)
        H = np.zeros((len(x), 4, 4))
        off = -w[:, 0] * s + w[:, 1] * c
        H[:, 0, 1] = H[:, 1, 0] = off
        H[:, 1, 1] = -rho * (w[:, 0] * c + w[:, 1] * s)
        return H

    def speed(self, x):
        x = np.asarray(x)
        return np.hypot(x[..., 2], x[..., 0] * x[..., 3])

    def rest_state(self, p):
        return np.array([np.hypot(p[0], p[1]), np.arctan2(p[1], p[0]), 0.0, 0.0])


MODELS = {m.name: m for m in (DoubleIntegrator2D(), Unicycle(), PolarDoubleIntegrator())}


def get_model(name: str):
    try:
        return MODELS[name]
    except KeyError:
        raise ModelError(f"unknown dynamics model {name!r}; known: {sorted(MODELS)}") from None


# ----------------------------------------------------------- typed records


@dataclass(frozen=True)
class DoubleIntegratorState:
    p: tuple
    v: tuple


@dataclass(frozen=True)
class UnicycleState:
    p: tuple
    heading: float
    speed: float


@dataclass(frozen=True)
class PolarState:
    rho: float
    theta: float
    rho_dot: float
    theta_dot: float


@dataclass(frozen=True)
class Acceleration2D:
    a: tuple


@dataclass(frozen=True)
class UnicycleControl:
    accel: float
    turn_rate: float


@dataclass(frozen=True)
class PolarControl:
    rho_ddot: float
    theta_ddot: float


_PAIRS = {
    DoubleIntegratorState: (Acceleration2D, "double_integrator"),
    UnicycleState: (UnicycleControl, "unicycle"),
    PolarState: (PolarControl, "polar_double_integrator"),
}


def state_vector(state) -> np.ndarray:
    if isinstance(state, DoubleIntegratorState):
        out = np.array([*state.p, *state.v], dtype=float)
    elif isinstance(state, UnicycleState):
        out = np.array([*state.p, state.heading, state.speed], dtype=float)
    elif isinstance(state, PolarState):
        out = np.array([state.rho, state.theta, state.rho_dot, state.theta_dot], dtype=float)
    else:
        raise ModelError(f"not an agent state: {type(state).__name__}")
    if out.shape != (4,) or not np.all(np.isfinite(out)):
        raise ModelError("state must have finite components")
    return out


def control_vector(control) -> np.ndarray:
    if isinstance(control, Acceleration2D):
        return np.array(control.a, dtype=float).reshape(2)
    if isinstance(control, UnicycleControl):
        return np.array([control.accel, control.turn_rate], dtype=float)
    if isinstance(control, PolarControl):
        return np.array([control.rho_ddot, control.theta_ddot], dtype=float)
    raise ModelError(f"not a control input: {type(control).__name__}")


def state_from_vector(kind: type, x) -> object:
    x = np.asarray(x, dtype=float)
    if kind is DoubleIntegratorState:
        return DoubleIntegratorState((x[0], x[1]), (x[2], x[3]))
    if kind is UnicycleState:
        return UnicycleState((x[0], x[1]), x[2], x[3])
    return PolarState(*x)


def _resolve(state, control):
    if type(state) not in _PAIRS:
        raise ModelError(f"not an agent state: {type(state).__name__}")
    ctrl_type, name = _PAIRS[type(state)]
    if not isinstance(control, ctrl_type):
        raise ModelError(
            f"{type(control).__name__} does not drive {type(state).__name__}; expected {ctrl_type.__name__}"
        )
    return MODELS[name]


def step(state, control, dt: float):
    """Advance a typed agent state by one step of length ``dt``."""
    model = _resolve(state, control)
    x = model.step(state_vector(state), control_vector(control), dt)
    return state_from_vector(type(state), x)


def step_jacobians(state, control, dt: float):
    """``(d step / d state, d step / d control)`` as dense matrices."""
    model = _resolve(state, control)
    A, B = model.jacobians(state_vector(state), control_vector(control), dt)
    return A[0], B[0]

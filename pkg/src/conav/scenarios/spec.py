"""Scenario description shared by the transcription, metric and drivers.

Obstacles are given as *templates* whose primitive parameters are produced
by ``param_map(theta)``.  Start and goal states are fixed arrays unless a
``task_map(theta)`` is supplied.  Both maps must be written with plain numpy
arithmetic so they accept complex input: their Jacobians are taken by
complex-step differentiation, which is exact to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from ..dynamics import get_model
from ..errors import ConfigError, InfeasibleTaskError
from ..geometry import param_slices
from ..safety import SafetyParams

_CS_STEP = 1e-30


def complex_step_jacobian(fun, x) -> np.ndarray:
    """Jacobian of a complex-safe map ``R^p -> R^m`` (output flattened)."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(fun(x), dtype=float).ravel()
    J = np.empty((f0.size, x.size))
    for k in range(x.size):
        xc = x.astype(complex)
        xc[k] += 1j * _CS_STEP
        J[:, k] = np.imag(np.asarray(fun(xc)).ravel()) / _CS_STEP
    return J


@dataclass(frozen=True, eq=False)
class EnvParams:
    """Environment parameter vector with its box of admissible values."""

    theta: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    names: tuple = ()

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.theta, dtype=float))
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), th.shape).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), th.shape).copy()
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        names = tuple(self.names) or tuple(f"theta[{k}]" for k in range(th.size))
        object.__setattr__(self, "names", names)
        if len(names) != th.size:
            raise ConfigError("one name per theta entry is required")
        if np.any(lo > hi):
            raise ConfigError("lower bound above upper bound")
        if not self.contains(th):
            raise ConfigError(f"theta outside its bounds: {th}")

    @property
    def dim(self) -> int:
        return self.theta.size

    def contains(self, theta, tol: float = 0.0) -> bool:
        theta = np.asarray(theta, dtype=float)
        return bool(np.all(theta >= self.lower - tol) and np.all(theta <= self.upper + tol))

    def clamp(self, theta) -> np.ndarray:
        return np.clip(np.asarray(theta, dtype=float), self.lower, self.upper)

    def with_theta(self, theta) -> "EnvParams":
        return replace(self, theta=self.clamp(theta))


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """Everything needed to set up and score one multi-agent navigation task."""

    name: str
    model: str
    starts: np.ndarray
    goals: np.ndarray
    horizon: int
    dt: float
    env: EnvParams
    templates: tuple = ()
    param_map: Optional[Callable] = None
    task_map: Optional[Callable] = None
    agent_radius: float = 0.3
    safety: SafetyParams = field(default_factory=SafetyParams)
    R: Optional[float] = None
    R1: np.ndarray = field(default_factory=lambda: np.diag([1.0, 1.0, 0.0, 0.0]))
    R2: np.ndarray = field(default_factory=lambda: 0.1 * np.eye(2))
    state_lower: np.ndarray = field(default_factory=lambda: np.full(4, -np.inf))
    state_upper: np.ndarray = field(default_factory=lambda: np.full(4, np.inf))
    control_lower: np.ndarray = field(default_factory=lambda: np.full(2, -np.inf))
    control_upper: np.ndarray = field(default_factory=lambda: np.full(2, np.inf))
    pair_separation: Optional[float] = None
    workspace: tuple = (-10.0, 10.0, -10.0, 10.0)
    max_speed: Optional[float] = None
    goal_tolerance: float = 0.1
    metric: str = "spl"
    init_bulge: float = 0.0
    init_via: Optional[object] = None
    baselines: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        m = get_model(self.model)
        starts = np.atleast_2d(np.asarray(self.starts, dtype=float))
        goals = np.atleast_2d(np.asarray(self.goals, dtype=float))
        object.__setattr__(self, "starts", starts)
        object.__setattr__(self, "goals", goals)
        for name in ("R1", "R2", "state_lower", "state_upper", "control_lower", "control_upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        object.__setattr__(self, "templates", tuple(self.templates))
        if starts.shape != (starts.shape[0], m.nx) or goals.shape != starts.shape:
            raise ConfigError(f"starts/goals must both be (N, {m.nx})")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.agent_radius < 0:
            raise ConfigError("agent radius must be >= 0")
        if self.R1.shape != (m.nx, m.nx) or self.R2.shape != (m.nu, m.nu):
            raise ConfigError("objective weight shapes do not match the dynamics model")
        if self.templates and self.param_map is None:
            raise ConfigError("obstacle templates need a param_map")
        if self.metric not in ("spl", "distance_ratio"):
            raise ConfigError(f"unknown metric {self.metric!r}")

    # ---- sizes
    @property
    def n_agents(self) -> int:
        return self.starts.shape[0]

    @property
    def n_obstacles(self) -> int:
        return len(self.templates)

    @property
    def dynamics(self):
        return get_model(self.model)

    @property
    def theta0(self) -> np.ndarray:
        return self.env.theta

    @property
    def separation(self) -> float:
        return 2.0 * self.agent_radius if self.pair_separation is None else float(self.pair_separation)

    @property
    def regularizer(self) -> float:
        if self.R is not None:
            return float(self.R)
        denom = self.n_obstacles + self.n_agents - 1
        return 1.0 / denom if denom > 0 else 1.0

    # ---- theta-dependent pieces
    def obstacle_params(self, theta) -> np.ndarray:
        if not self.templates:
            return np.zeros(0)
        return np.asarray(self.param_map(np.asarray(theta, dtype=float)), dtype=float).ravel()

    def obstacle_param_jacobian(self, theta) -> np.ndarray:
        if not self.templates:
            return np.zeros((0, self.env.dim))
        return complex_step_jacobian(self.param_map, theta)

    def obstacles(self, theta) -> list:
        q = self.obstacle_params(theta)
        return [t.with_params(q[sl]) for t, sl in zip(self.templates, param_slices(self.templates))]

    def task(self, theta):
        if self.task_map is None:
            return self.starts, self.goals
        S, G = self.task_map(np.asarray(theta, dtype=float))
        return np.asarray(S, dtype=float).reshape(self.starts.shape), np.asarray(G, dtype=float).reshape(
            self.goals.shape
        )

    def via_points(self, theta) -> Optional[np.ndarray]:
        """Waypoints ``(N, K, 2)`` the initial guess is routed through, if any."""
        if self.init_via is None:
            return None
        v = self.init_via(np.asarray(theta, dtype=float)) if callable(self.init_via) else self.init_via
        v = np.asarray(v, dtype=float)
        if v.ndim == 2:
            v = np.broadcast_to(v, (self.n_agents,) + v.shape)
        return v

    def task_jacobian(self, theta):
        """``(dS/dtheta, dG/dtheta)`` of shape ``(N, nx, p)`` each."""
        p = self.env.dim
        shape = self.starts.shape + (p,)
        if self.task_map is None:
            return np.zeros(shape), np.zeros(shape)
        J = complex_step_jacobian(lambda th: np.concatenate([np.ravel(a) for a in self.task_map(th)]), theta)
        half = J.shape[0] // 2
        return J[:half].reshape(shape), J[half:].reshape(shape)

    # ---- derived scenarios
    def with_theta0(self, theta) -> "ScenarioSpec":
        return replace(self, env=self.env.with_theta(theta))

    def with_task(self, starts, goals) -> "ScenarioSpec":
        return replace(self, starts=starts, goals=goals, task_map=None)

    def without_obstacles(self) -> "ScenarioSpec":
        return replace(self, templates=(), param_map=None)

    def audit(self, theta=None) -> None:
        """Check the start/goal clearance condition at ``theta``.

        Raises :class:`InfeasibleTaskError` when a start or goal disc
        overlaps an obstacle or when two starts (or two goals) overlap.
        """
        theta = self.theta0 if theta is None else theta
        if not self.env.contains(theta, tol=1e-12):
            raise InfeasibleTaskError(f"theta outside bounds: {theta}")
        m = self.dynamics
        S, G = self.task(theta)
        ps, pg = m.position(S), m.position(G)
        for j, ob in enumerate(self.obstacles(theta)):
            for label, pts in (("start", ps), ("goal", pg)):
                d = np.atleast_1d(ob.signed_distance(pts, self.agent_radius))
                g = ob.constraint(pts, self.agent_radius).g
                bad = np.flatnonzero((d < 0) | (g > 0))
                if bad.size:
                    raise InfeasibleTaskError(f"{label} of agent {bad[0]} is inside obstacle {j}")
        sep = self.separation
        for label, pts in (("start", ps), ("goal", pg)):
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.sqrt((diff**2).sum(-1)) + np.eye(len(pts)) * 1e9
            if np.any(dist < sep):
                i, j = np.argwhere(dist < sep)[0]
                raise InfeasibleTaskError(f"{label}s of agents {i} and {j} are closer than {sep}")

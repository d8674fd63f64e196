"""Parametric obstacles and differentiable distances.

Every obstacle exposes the same small surface:

* ``params`` / ``with_params`` -- a flat vector of primitive parameters
  (circle: ``cx, cy, r``; segment: ``ax, ay, bx, by``; track: seven waypoint
  radii and the half-width).  Environment parameters are mapped onto these
  vectors by the scenario, so derivatives with respect to the environment are
  chained through ``d params / d theta``.
* ``signed_distance`` -- boundary-to-boundary distance between an agent disc
  and the obstacle, negative on overlap.  Used by the safety metric and the
  collision counters.
* ``constraint`` -- the smooth inequality ``g(p) <= 0`` handed to the
  trajectory optimizer, with first and second derivatives in the agent
  position and the obstacle parameters.

All evaluators are vectorized over a stack of points of shape ``(K, 2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np

from .errors import DegenerateGradientError, GeometryError

#: Distance reported for a line boundary whose perpendicular foot lies outside
#: its extent.  Larger than any safety threshold used in practice.
INACTIVE_DISTANCE = 1.0e6

N_WAYPOINTS = 7


class ConstraintEval(NamedTuple):
    """Value and derivatives of an obstacle constraint ``g <= 0``.

    Shapes for K query points and P obstacle parameters: ``g (K,)``,
    ``g_p (K, 2)``, ``g_pp (K, 2, 2)``, ``g_q (K, P)``, ``g_pq (K, 2, P)``.
    """

    g: np.ndarray
    g_p: np.ndarray
    g_pp: np.ndarray
    g_q: np.ndarray
    g_pq: np.ndarray


def _points(p) -> tuple[np.ndarray, bool]:
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.shape[-1] != 2:
        raise GeometryError(f"points must have a trailing dimension of 2, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise GeometryError("non-finite point coordinates")
    return arr, single


def _check_radius(agent_radius: float) -> float:
    r = float(agent_radius)
    if not np.isfinite(r) or r < 0:
        raise GeometryError(f"agent radius must be finite and >= 0, got {agent_radius}")
    return r


# --------------------------------------------------------------------- circle


@dataclass(frozen=True, eq=False)
class Circle:
    """Disc obstacle.

    ``combiner`` sets the radius used by the optimizer constraint
    ``rho**2 - |p - c|**2 <= 0``: ``"half_sum"`` uses ``rho = (r_a + r_o) / 2``,
    ``"sum"`` uses ``rho = r_a + r_o`` (exact non-overlap of the two discs).
    The signed distance is always the exact ``|p - c| - r_o - r_a``.
    """

    center: np.ndarray
    radius: float
    combiner: str = "half_sum"
    kind: str = field(default="circle", init=False)

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float).reshape(2)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))
        if not (np.all(np.isfinite(c)) and np.isfinite(self.radius)):
            raise GeometryError("circle center/radius must be finite")
        if self.radius <= 0:
            raise GeometryError(f"circle radius must be positive, got {self.radius}")
        if self.combiner not in ("half_sum", "sum"):
            raise GeometryError(f"unknown radius combiner {self.combiner!r}")

    n_params = 3

    @property
    def params(self) -> np.ndarray:
        return np.array([self.center[0], self.center[1], self.radius])

    def with_params(self, q) -> "Circle":
        q = np.asarray(q, dtype=float)
        return Circle(q[:2], q[2], combiner=self.combiner)

    def constraint_radius(self, agent_radius: float) -> float:
        if self.combiner == "half_sum":
            return 0.5 * (agent_radius + self.radius)
        return agent_radius + self.radius

    def _radius_slope(self) -> float:
        return 0.5 if self.combiner == "half_sum" else 1.0

    def signed_distance(self, p, agent_radius: float) -> np.ndarray:
        pts, single = _points(p)
        d = np.linalg.norm(pts - self.center, axis=1) - self.radius - _check_radius(agent_radius)
        return d[0] if single else d

    def distance_gradients(self, p, agent_radius: float):
        pts, single = _points(p)
        _check_radius(agent_radius)
        diff = pts - self.center
        dist = np.linalg.norm(diff, axis=1)
        if np.any(dist == 0.0):
            raise DegenerateGradientError(
                "distance gradient undefined at the circle center", subgradient=np.array([1.0, 0.0])
            )
        gp = diff / dist[:, None]
        gq = np.concatenate([-gp, -np.ones((len(pts), 1))], axis=1)
        return (gp[0], gq[0]) if single else (gp, gq)

    def constraint(self, p, agent_radius: float) -> ConstraintEval:
        pts, _ = _points(p)
        k = len(pts)
        rho = self.constraint_radius(agent_radius)
        diff = pts - self.center
        g = rho**2 - np.einsum("ij,ij->i", diff, diff)
        g_p = -2.0 * diff
        g_pp = np.broadcast_to(-2.0 * np.eye(2), (k, 2, 2)).copy()
        g_q = np.empty((k, 3))
        g_q[:, :2] = 2.0 * diff
        g_q[:, 2] = 2.0 * rho * self._radius_slope()
        g_pq = np.zeros((k, 2, 3))
        g_pq[:, 0, 0] = 2.0
        g_pq[:, 1, 1] = 2.0
        return ConstraintEval(g, g_p, g_pp, g_q, g_pq)


# ------------------------------------------------------------ line boundary

# c = cross(b - a, p - a) written as a homogeneous quadratic 0.5 w^T H w in
# w = (p, a, b); likewise E = |b - a|^2.
_J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def _block_quadratic(pairs) -> np.ndarray:
    h = np.zeros((6, 6))
    for (i, j), blk in pairs:
        h[2 * i : 2 * i + 2, 2 * j : 2 * j + 2] += blk
        h[2 * j : 2 * j + 2, 2 * i : 2 * i + 2] += blk.T
    return h


_P, _A, _B = 0, 1, 2
_H_CROSS = _block_quadratic([((_A, _B), _J2), ((_B, _P), _J2), ((_P, _A), _J2)])
_I2 = np.eye(2)
_H_LEN = np.zeros((6, 6))
_H_LEN[2:4, 2:4] = 2 * _I2
_H_LEN[4:6, 4:6] = 2 * _I2
_H_LEN[2:4, 4:6] = -2 * _I2
_H_LEN[4:6, 2:4] = -2 * _I2


def _endpoint_hessian(end: int) -> np.ndarray:
    h = np.zeros((6, 6))
    e = slice(2 * end, 2 * end + 2)
    h[0:2, 0:2] = 2 * _I2
    h[e, e] = 2 * _I2
    h[0:2, e] = -2 * _I2
    h[e, 0:2] = -2 * _I2
    return h


_H_END = {_A: _endpoint_hessian(_A), _B: _endpoint_hessian(_B)}


def segment_sqdist(pts: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Squared point-to-segment distance with its gradient and Hessian.

    Derivatives are taken with respect to ``w = (p, a, b)`` (6 entries).  The
    function is C1; the Hessian switches between the interior (perpendicular)
    branch and the endpoint branches.

    Returns ``phi (K,)``, ``grad (K, 6)``, ``hess (K, 6, 6)`` and the
    projection parameter ``t (K,)`` (unclipped).
    """
    k = len(pts)
    w = np.empty((k, 6))
    w[:, 0:2] = pts
    w[:, 2:4] = a
    w[:, 4:6] = b
    e = b - a
    elen = float(e @ e)
    q = pts - a
    t = (q @ e) / elen

    c = 0.5 * np.einsum("ki,ij,kj->k", w, _H_CROSS, w)
    gc = w @ _H_CROSS
    ge = w @ _H_LEN

    phi = c**2 / elen
    grad = 2 * c[:, None] * gc / elen - (c**2)[:, None] * ge / elen**2
    hess = (
        2 * np.einsum("ki,kj->kij", gc, gc) / elen
        + 2 * c[:, None, None] * _H_CROSS / elen
        - 2 * c[:, None, None] * (np.einsum("ki,kj->kij", gc, ge) + np.einsum("ki,kj->kij", ge, gc)) / elen**2
        - (c**2)[:, None, None] * _H_LEN / elen**2
        + 2 * (c**2)[:, None, None] * np.einsum("ki,kj->kij", ge, ge) / elen**3
    )

    for end, mask in ((_A, t <= 0.0), (_B, t >= 1.0)):
        if not np.any(mask):
            continue
        diff = pts[mask] - (a if end == _A else b)
        phi[mask] = np.einsum("ij,ij->i", diff, diff)
        gm = np.zeros((int(mask.sum()), 6))
        gm[:, 0:2] = 2 * diff
        gm[:, 2 * end : 2 * end + 2] = -2 * diff
        grad[mask] = gm
        hess[mask] = _H_END[end]
    return phi, grad, hess, t


@dataclass(frozen=True, eq=False)
class LineBoundary:
    """Straight boundary segment from ``a`` to ``b``.

    The line is ``R1 x + R2 y + R3 = 0`` with ``(R1, R2)`` the unit normal.
    ``signed_distance`` follows ``outside``: with ``"inactive"`` (default) a
    point whose perpendicular foot falls outside the segment is reported at
    :data:`INACTIVE_DISTANCE`; with ``"capsule"`` the distance to the nearest
    endpoint is used instead.

    The optimizer constraint is ``r_a**2 - dist(p, segment)**2 <= 0``, which
    coincides with the perpendicular-distance form whenever the foot lies in
    the extent and extends it smoothly past the endpoints.
    """

    a: np.ndarray
    b: np.ndarray
    outside: str = "inactive"
    kind: str = field(default="line", init=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(2)
        b = np.asarray(self.b, dtype=float).reshape(2)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise GeometryError("segment endpoints must be finite")
        if np.allclose(a, b, rtol=0.0, atol=1e-12):
            raise GeometryError("degenerate segment: (R1, R2) would be (0, 0)")
        if self.outside not in ("inactive", "capsule"):
            raise GeometryError(f"unknown outside policy {self.outside!r}")

    n_params = 4

    @classmethod
    def from_coefficients(cls, R1, R2, R3, extent, outside="inactive") -> "LineBoundary":
        """Segment of ``R1 x + R2 y + R3 = 0`` over an interval of the line.

        ``extent = (s0, s1)`` is measured along the direction ``(R2, -R1)``
        from the point of the line closest to the origin.
        """
        coef = np.array([R1, R2, R3], dtype=float)
        if not np.all(np.isfinite(coef)):
            raise GeometryError("non-finite line coefficients")
        norm = float(np.hypot(R1, R2))
        if norm == 0.0:
            raise GeometryError("(R1, R2) must not both be zero")
        direction = np.array([R2, -R1]) / norm
        foot = -R3 * np.array([R1, R2]) / norm**2
        s0, s1 = extent
        return cls(foot + s0 * direction, foot + s1 * direction, outside=outside)

    @property
    def direction(self) -> np.ndarray:
        e = self.b - self.a
        return e / np.linalg.norm(e)

    @property
    def coefficients(self) -> tuple[float, float, float]:
        d = self.direction
        r1, r2 = -d[1], d[0]
        # + 0.0 normalizes negative zeros
        return float(r1) + 0.0, float(r2) + 0.0, float(-(r1 * self.a[0] + r2 * self.a[1])) + 0.0

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([self.a, self.b])

    def with_params(self, q) -> "LineBoundary":
        q = np.asarray(q, dtype=float)
        return LineBoundary(q[:2], q[2:4], outside=self.outside)

    def _perp(self, pts):
        e = self.b - self.a
        elen = float(e @ e)
        q = pts - self.a
        t = (q @ e) / elen
        cross = e[0] * q[:, 1] - e[1] * q[:, 0]
        return cross, elen, t

    def signed_distance(self, p, agent_radius: float):
        pts, single = _points(p)
        r = _check_radius(agent_radius)
        if self.outside == "capsule":
            phi = segment_sqdist(pts, self.a, self.b)[0]
            d = np.sqrt(phi) - r
        else:
            cross, elen, t = self._perp(pts)
            d = np.abs(cross) / np.sqrt(elen) - r
            d = np.where((t >= 0.0) & (t <= 1.0), d, INACTIVE_DISTANCE)
        return d[0] if single else d

    def distance_gradients(self, p, agent_radius: float):
        pts, single = _points(p)
        _check_radius(agent_radius)
        k = len(pts)
        gp = np.zeros((k, 2))
        gq = np.zeros((k, 4))
        if self.outside == "capsule":
            phi, grad, _, _ = segment_sqdist(pts, self.a, self.b)
            if np.any(phi == 0.0):
                raise DegenerateGradientError("point lies on the segment", subgradient=self._normal())
            full = grad / (2 * np.sqrt(phi))[:, None]
        else:
            cross, elen, t = self._perp(pts)
            inside = (t >= 0.0) & (t <= 1.0)
            if np.any(inside & ((np.abs(t) < 1e-12) | (np.abs(t - 1.0) < 1e-12))):
                raise DegenerateGradientError(
                    "perpendicular foot at a segment endpoint", subgradient=np.zeros(2)
                )
            if np.any(inside & (cross == 0.0)):
                raise DegenerateGradientError("point lies on the boundary line", subgradient=self._normal())
            w = np.empty((k, 6))
            w[:, 0:2], w[:, 2:4], w[:, 4:6] = pts, self.a, self.b
            gc = w @ _H_CROSS
            ge = w @ _H_LEN
            sgn = np.sign(cross)
            full = sgn[:, None] * gc / np.sqrt(elen) - np.abs(cross)[:, None] * ge / (2 * elen**1.5)
            full[~inside] = 0.0
        gp[:] = full[:, 0:2]
        gq[:] = full[:, 2:6]
        return (gp[0], gq[0]) if single else (gp, gq)

    def _normal(self):
        d = self.direction
        return np.array([-d[1], d[0]])

    def constraint(self, p, agent_radius: float) -> ConstraintEval:
        pts, _ = _points(p)
        phi, grad, hess, _ = segment_sqdist(pts, self.a, self.b)
        g = agent_radius**2 - phi
        return ConstraintEval(g, -grad[:, 0:2], -hess[:, 0:2, 0:2], -grad[:, 2:6], -hess[:, 0:2, 2:6])


# ------------------------------------------------------------ track boundary


def waypoint_angles(n: int = N_WAYPOINTS) -> np.ndarray:
    return 2 * np.pi * np.arange(n) / n


def trig_basis(phi, n: int = N_WAYPOINTS):
    """Cardinal basis of degree-(n-1)/2 trigonometric interpolation.

    Returns ``L, dL, d2L`` of shape ``(K, n)``: ``L[k, j]`` is the weight of
    waypoint ``j`` at angle ``phi[k]``, so the interpolant through radii ``r``
    is ``L @ r``.  ``n`` must be odd.
    """
    if n % 2 == 0:
        raise GeometryError("trigonometric interpolation needs an odd number of waypoints")
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    x = phi[:, None] - waypoint_angles(n)[None, :]
    m = np.arange(1, (n - 1) // 2 + 1)
    mx = x[..., None] * m
    L = (1 + 2 * np.cos(mx).sum(-1)) / n
    dL = -2 * (m * np.sin(mx)).sum(-1) / n
    d2L = -2 * (m**2 * np.cos(mx)).sum(-1) / n
    return L, dL, d2L


def _polar_derivs(pts):
    x, y = pts[:, 0], pts[:, 1]
    rho2 = x**2 + y**2
    rho = np.sqrt(rho2)
    if np.any(rho == 0.0):
        raise DegenerateGradientError("polar angle undefined at the origin", subgradient=np.zeros(2))
    phi = np.arctan2(y, x)
    d_rho = pts / rho[:, None]
    d_phi = np.stack([-y, x], axis=1) / rho2[:, None]
    h_rho = (np.eye(2)[None] - np.einsum("ki,kj->kij", d_rho, d_rho)) / rho[:, None, None]
    h_phi = np.empty((len(pts), 2, 2))
    h_phi[:, 0, 0] = 2 * x * y
    h_phi[:, 1, 1] = -2 * x * y
    h_phi[:, 0, 1] = h_phi[:, 1, 0] = y**2 - x**2
    h_phi /= (rho2**2)[:, None, None]
    return rho, phi, d_rho, d_phi, h_rho, h_phi


@dataclass(frozen=True, eq=False)
class TrackBoundary:
    """Closed track: a band of half-width ``half_width`` around a centerline.

    The centerline radius is the trigonometric interpolant through seven
    waypoints at equally spaced angles.  Distances are radial: an agent at
    polar position ``(rho, phi)`` is ``half_width - |rho - r_c(phi)| - r_a``
    away from the nearer boundary.  ``fixed_mask`` marks waypoints that the
    environment optimizer may not move.
    """

    waypoint_radii: np.ndarray
    half_width: float
    fixed_mask: tuple = (True, True, False, False, False, False, False)
    kind: str = field(default="track", init=False)

    def __post_init__(self):
        r = np.asarray(self.waypoint_radii, dtype=float).reshape(-1)
        object.__setattr__(self, "waypoint_radii", r)
        object.__setattr__(self, "half_width", float(self.half_width))
        object.__setattr__(self, "fixed_mask", tuple(bool(v) for v in self.fixed_mask))
        if len(r) != N_WAYPOINTS or len(self.fixed_mask) != N_WAYPOINTS:
            raise GeometryError(f"track needs exactly {N_WAYPOINTS} waypoints")
        if not (np.all(np.isfinite(r)) and np.isfinite(self.half_width)):
            raise GeometryError("track radii/half-width must be finite")
        if self.half_width <= 0:
            raise GeometryError("track half-width must be positive")
        if np.any(r <= self.half_width):
            raise GeometryError("waypoint radii must exceed the half-width")

    n_params = N_WAYPOINTS + 1

    @property
    def params(self) -> np.ndarray:
        return np.append(self.waypoint_radii, self.half_width)

    def with_params(self, q) -> "TrackBoundary":
        q = np.asarray(q, dtype=float)
        return TrackBoundary(q[:N_WAYPOINTS], q[N_WAYPOINTS], fixed_mask=self.fixed_mask)

    def centerline(self, phi):
        """Centerline radius and its first two angular derivatives."""
        L, dL, d2L = trig_basis(phi)
        r = self.waypoint_radii
        return L @ r, dL @ r, d2L @ r

    def centerline_points(self, n: int = 200) -> np.ndarray:
        phi = np.linspace(0, 2 * np.pi, n)
        rc = self.centerline(phi)[0]
        return np.stack([rc * np.cos(phi), rc * np.sin(phi)], axis=1)

    def signed_distance(self, p, agent_radius: float):
        pts, single = _points(p)
        r = _check_radius(agent_radius)
        rho = np.linalg.norm(pts, axis=1)
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        rc = self.centerline(phi)[0]
        d = self.half_width - np.abs(rho - rc) - r
        return d[0] if single else d

    def distance_gradients(self, p, agent_radius: float):
        pts, single = _points(p)
        _check_radius(agent_radius)
        rho, phi, d_rho, d_phi, _, _ = _polar_derivs(pts)
        L, dL, _ = trig_basis(phi)
        rc = L @ self.waypoint_radii
        drc = dL @ self.waypoint_radii
        delta = rho - rc
        if np.any(delta == 0.0):
            raise DegenerateGradientError("point lies on the centerline", subgradient=np.zeros(2))
        s = np.sign(delta)
        d_delta = d_rho - drc[:, None] * d_phi
        gp = -s[:, None] * d_delta
        gq = np.empty((len(pts), N_WAYPOINTS + 1))
        gq[:, :N_WAYPOINTS] = s[:, None] * L
        gq[:, N_WAYPOINTS] = 1.0
        return (gp[0], gq[0]) if single else (gp, gq)

    def constraint(self, p, agent_radius: float) -> ConstraintEval:
        pts, _ = _points(p)
        rho, phi, d_rho, d_phi, h_rho, h_phi = _polar_derivs(pts)
        L, dL, d2L = trig_basis(phi)
        r = self.waypoint_radii
        rc, drc, d2rc = L @ r, dL @ r, d2L @ r
        h = self.half_width - agent_radius
        delta = rho - rc
        d_delta = d_rho - drc[:, None] * d_phi
        h_delta = (
            h_rho
            - d2rc[:, None, None] * np.einsum("ki,kj->kij", d_phi, d_phi)
            - drc[:, None, None] * h_phi
        )
        g = delta**2 - h**2
        g_p = 2 * delta[:, None] * d_delta
        g_pp = 2 * np.einsum("ki,kj->kij", d_delta, d_delta) + 2 * delta[:, None, None] * h_delta
        k = len(pts)
        g_q = np.empty((k, N_WAYPOINTS + 1))
        g_q[:, :N_WAYPOINTS] = -2 * delta[:, None] * L
        g_q[:, N_WAYPOINTS] = -2 * h
        g_pq = np.zeros((k, 2, N_WAYPOINTS + 1))
        g_pq[:, :, :N_WAYPOINTS] = -2 * (
            d_delta[:, :, None] * L[:, None, :] + delta[:, None, None] * d_phi[:, :, None] * dL[:, None, :]
        )
        return ConstraintEval(g, g_p, g_pp, g_q, g_pq)


Obstacle = Union[Circle, LineBoundary, TrackBoundary]


# -------------------------------------------------------------- module API


def signed_distance(obstacle: Obstacle, p, agent_radius: float):
    """Signed boundary-to-boundary distance between an agent disc and ``obstacle``."""
    return obstacle.signed_distance(p, agent_radius)


def signed_distance_gradients(obstacle: Obstacle, p, agent_radius: float):
    """Gradients of :func:`signed_distance` w.r.t. the point and the obstacle params.

    Raises :class:`DegenerateGradientError` at non-differentiable points.
    """
    return obstacle.distance_gradients(p, agent_radius)


def agent_pair_distance(p_i, p_j, agent_radius: float):
    """Boundary-to-boundary distance of two agent discs of equal radius."""
    pi = np.asarray(p_i, dtype=float)
    pj = np.asarray(p_j, dtype=float)
    # sort the pair so that f(a, b) and f(b, a) round identically
    lo = np.minimum(pi, pj)
    hi = np.maximum(pi, pj)
    return np.linalg.norm(hi - lo, axis=-1) - 2.0 * agent_radius


def agent_pair_constraint(p_i, p_j, min_separation: float):
    """``D**2 - |p_i - p_j|**2`` and its gradient w.r.t. ``p_i`` (that w.r.t. ``p_j`` is the negative)."""
    diff = np.asarray(p_i, dtype=float) - np.asarray(p_j, dtype=float)
    return min_separation**2 - np.einsum("...i,...i->...", diff, diff), -2.0 * diff


def stack_params(obstacles) -> np.ndarray:
    if not obstacles:
        return np.zeros(0)
    return np.concatenate([ob.params for ob in obstacles])


def param_slices(obstacles) -> list[slice]:
    out, start = [], 0
    for ob in obstacles:
        out.append(slice(start, start + ob.n_params))
        start += ob.n_params
    return out

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conav.errors import DegenerateGradientError, GeometryError
from conav.geometry import (
    INACTIVE_DISTANCE,
    Circle,
    LineBoundary,
    TrackBoundary,
    agent_pair_distance,
    signed_distance,
    signed_distance_gradients,
)

coord = st.floats(-8, 8, allow_nan=False)
pt = st.tuples(coord, coord)


def fd_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-8)


class TestSignedDistance:
    def test_circle_hand_value(self):
        assert signed_distance(Circle((0, 0), 1.5), (3, 0), 0.3) == pytest.approx(1.2, abs=1e-15)

    def test_circle_on_boundary(self):
        assert signed_distance(Circle((0, 0), 1.5), (1.5, 0), 0.0) == 0.0

    def test_line_perpendicular(self):
        line = LineBoundary.from_coefficients(0.0, 1.0, 0.0, extent=(-5.0, 5.0))
        assert signed_distance(line, (2, 4), 0.3) == pytest.approx(3.7, abs=1e-14)

    def test_line_outside_extent_is_inactive(self):
        line = LineBoundary((0, 0), (1, 0))
        assert signed_distance(line, (3, 0.5), 0.3) == INACTIVE_DISTANCE
        assert INACTIVE_DISTANCE > 100.0

    def test_capsule_uses_endpoint(self):
        line = LineBoundary((0, 0), (1, 0), outside="capsule")
        assert signed_distance(line, (4, 4), 0.0) == pytest.approx(5.0)

    def test_overlap_is_negative(self):
        assert signed_distance(Circle((0, 0), 1.0), (0.5, 0), 0.3) == pytest.approx(-0.8)

    @pytest.mark.parametrize("bad", [(np.nan, 0.0), (np.inf, 1.0)])
    def test_non_finite_point_rejected(self, bad):
        with pytest.raises(GeometryError):
            signed_distance(Circle((0, 0), 1.0), bad, 0.3)

    def test_invalid_obstacles(self):
        with pytest.raises(GeometryError):
            Circle((0, 0), 0.0)
        with pytest.raises(GeometryError):
            Circle((np.nan, 0), 1.0)
        with pytest.raises(GeometryError):
            LineBoundary.from_coefficients(0.0, 0.0, 1.0, extent=(0, 1))
        with pytest.raises(GeometryError):
            TrackBoundary(np.full(7, 6.0), 0.0)

    def test_track_radial_distance(self):
        tr = TrackBoundary(np.full(7, 6.0), 1.25)
        # on the centerline: half-width minus agent radius
        assert signed_distance(tr, (6.0, 0.0), 0.3) == pytest.approx(0.95)
        assert signed_distance(tr, (0.0, 7.0), 0.3) == pytest.approx(-0.05)


class TestGradients:
    def test_circle_radial(self):
        gp, gq = signed_distance_gradients(Circle((0, 0), 1.5), (3, 0), 0.3)
        np.testing.assert_allclose(gp, [1.0, 0.0])
        assert gq[0] == pytest.approx(-1.0)

    def test_line_normal(self):
        line = LineBoundary.from_coefficients(0.0, 1.0, 0.0, extent=(-5.0, 5.0))
        gp, _ = signed_distance_gradients(line, (2, 4), 0.3)
        np.testing.assert_allclose(gp, [0.0, 1.0], atol=1e-15)

    def test_degenerate_circle_center(self):
        with pytest.raises(DegenerateGradientError) as exc:
            signed_distance_gradients(Circle((1, 1), 1.0), (1, 1), 0.3)
        assert exc.value.subgradient is not None

    @given(pt, pt, st.floats(0.2, 3.0))
    def test_circle_fd(self, c, p, r):
        assume(np.hypot(p[0] - c[0], p[1] - c[1]) > 1e-2)
        ob = Circle(c, r)
        gp, gq = signed_distance_gradients(ob, p, 0.3)
        assert rel(gp, fd_grad(lambda x: ob.signed_distance(x, 0.3), p)) <= 1e-6
        assert rel(gq, fd_grad(lambda q: ob.with_params(q).signed_distance(p, 0.3), ob.params)) <= 1e-6

    @given(pt, pt, pt)
    def test_line_fd(self, a, b, p):
        a, b, p = map(np.asarray, (a, b, p))
        assume(np.linalg.norm(b - a) > 0.5)
        ob = LineBoundary(a, b)
        e = b - a
        t = (p - a) @ e / (e @ e)
        cross = e[0] * (p - a)[1] - e[1] * (p - a)[0]
        assume(0.01 < t < 0.99 and abs(cross) / np.linalg.norm(e) > 1e-2)
        gp, gq = signed_distance_gradients(ob, p, 0.3)
        assert rel(gp, fd_grad(lambda x: ob.signed_distance(x, 0.3), p)) <= 1e-6
        assert rel(gq, fd_grad(lambda q: ob.with_params(q).signed_distance(p, 0.3), ob.params)) <= 1e-6

    @given(st.floats(0.0, 2 * np.pi), st.floats(-1.0, 1.0))
    def test_track_fd(self, phi, off):
        radii = np.array([6.0, 7.0, 5.5, 6.5, 6.0, 5.2, 7.0])
        ob = TrackBoundary(radii, 1.25)
        rc = float(np.ravel(ob.centerline(phi)[0])[0])
        assume(abs(off) > 1e-3)
        p = np.array([(rc + off) * np.cos(phi), (rc + off) * np.sin(phi)])
        gp, gq = signed_distance_gradients(ob, p, 0.3)
        assert rel(gp, fd_grad(lambda x: ob.signed_distance(x, 0.3), p)) <= 1e-6
        assert rel(gq, fd_grad(lambda q: ob.with_params(q).signed_distance(p, 0.3), ob.params)) <= 1e-6


class TestProperties:
    @given(pt, pt, pt, st.floats(0.1, 3.0))
    def test_translation_equivariance_circle(self, c, p, s, r):
        a = Circle(c, r).signed_distance(p, 0.3)
        b = Circle(np.add(c, s), r).signed_distance(np.add(p, s), 0.3)
        assert abs(a - b) <= 1e-12

    @given(pt, pt, pt)
    def test_translation_equivariance_line(self, a, p, s):
        b = np.add(a, (2.0, 1.0))
        d1 = LineBoundary(a, b, outside="capsule").signed_distance(p, 0.3)
        d2 = LineBoundary(np.add(a, s), np.add(b, s), outside="capsule").signed_distance(np.add(p, s), 0.3)
        assert abs(d1 - d2) <= 1e-9

    @given(pt, pt, st.floats(0.1, 3.0), st.floats(0.0, 1.0))
    def test_circle_formula_exact(self, c, p, r, ra):
        d = Circle(c, r).signed_distance(p, ra)
        dx, dy = p[0] - c[0], p[1] - c[1]
        assert d == np.sqrt(dx * dx + dy * dy) - r - ra

    @given(pt, pt, st.floats(0.0, 1.0))
    def test_pair_symmetry(self, a, b, r):
        assert agent_pair_distance(a, b, r) == agent_pair_distance(b, a, r)


class TestPairDistance:
    def test_values(self):
        assert agent_pair_distance((0, 0), (1, 0), 0.3) == pytest.approx(0.4)
        assert agent_pair_distance((2, 2), (2, 2), 0.3) == pytest.approx(-0.6)

"""Group arithmetic, gauge, and geodesic-distance unit tests.

The sub-Riemannian solver is checked against an independent oracle that
integrates the horizontal geodesic equations by high-order ODE shooting.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from h1qclab import geometry as geo
from h1qclab.errors import InvalidArgumentError
from h1qclab.geometry import Ball, Curve, Metric, Point

RNG = np.random.default_rng(20240811)

coord = st.floats(min_value=-5.0, max_value=5.0, allow_nan=False,
                  allow_infinity=False)
triple = st.tuples(coord, coord, coord)


def rand_pts(n, scale=2.0, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-scale, scale, size=(n, 3))
    pts[:, 2] *= scale
    return pts


# ---------------------------------------------------------------------------
# Group structure.

class TestGroupLaw:
    def test_identity(self):
        a = rand_pts(200, seed=1)
        e = np.zeros(3)
        assert np.allclose(geo.mul(a, e), a, atol=0)
        assert np.allclose(geo.mul(e, a), a, atol=0)

    def test_inverse(self):
        a = rand_pts(200, seed=2)
        assert np.max(np.abs(geo.mul(a, geo.inv(a)))) < 1e-12
        assert np.max(np.abs(geo.mul(geo.inv(a), a))) < 1e-12

    def test_associativity(self):
        a, b, c = (rand_pts(300, seed=s) for s in (3, 4, 5))
        lhs = geo.mul(geo.mul(a, b), c)
        rhs = geo.mul(a, geo.mul(b, c))
        assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_noncommutative(self):
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([0.0, 1.0, 0.0])
        assert not np.allclose(geo.mul(a, b), geo.mul(b, a))

    def test_vertical_center(self):
        # (0, 0, s) commutes with everything.
        a = rand_pts(100, seed=6)
        z = np.array([0.0, 0.0, 0.7])
        assert np.allclose(geo.mul(a, z), geo.mul(z, a), atol=1e-14)

    @given(triple, triple)
    @settings(max_examples=60, deadline=None)
    def test_point_level_matches_arrays(self, u, v):
        p, q = Point(*u), Point(*v)
        arr = geo.mul(p.as_array(), q.as_array())
        pq = geo.group_mul(p, q)
        assert np.allclose(pq.as_array(), arr, atol=0)

    def test_dilation_is_automorphism(self):
        a, b = rand_pts(200, seed=7), rand_pts(200, seed=8)
        for lam in (0.3, 1.0, 2.5):
            lhs = geo.dilate_arr(lam, geo.mul(a, b))
            rhs = geo.mul(geo.dilate_arr(lam, a), geo.dilate_arr(lam, b))
            assert np.max(np.abs(lhs - rhs)) < 1e-12

    def test_nonfinite_point_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Point(float("nan"), 0.0, 0.0)
        with pytest.raises(InvalidArgumentError):
            Point(0.0, float("inf"), 0.0)

    def test_dilate_rejects_bad_factor(self):
        with pytest.raises(InvalidArgumentError):
            geo.dilate(0.0, Point(1, 0, 0))
        with pytest.raises(InvalidArgumentError):
            geo.dilate(-2.0, Point(1, 0, 0))


# ---------------------------------------------------------------------------
# Gauge and Koranyi distance.

class TestGauge:
    def test_formula(self):
        a = rand_pts(100, seed=9)
        expect = ((a[:, 0] ** 2 + a[:, 1] ** 2) ** 2 + a[:, 2] ** 2) ** 0.25
        assert np.allclose(geo.gauge(a), expect, rtol=1e-15)

    def test_homogeneity(self):
        a = rand_pts(200, seed=10)
        for lam in (0.2, 3.0):
            assert np.allclose(geo.gauge(geo.dilate_arr(lam, a)),
                               lam * geo.gauge(a), rtol=1e-13)

    def test_symmetry_under_inverse(self):
        a = rand_pts(200, seed=11)
        assert np.allclose(geo.gauge(geo.inv(a)), geo.gauge(a), atol=0)

    def test_distance_symmetry_and_identity(self):
        p, q = rand_pts(300, seed=12), rand_pts(300, seed=13)
        assert np.allclose(geo.koranyi_dist_arr(p, q),
                           geo.koranyi_dist_arr(q, p), rtol=1e-13)
        assert np.allclose(geo.koranyi_dist_arr(p, p), 0.0, atol=0)

    def test_triangle_inequality(self):
        p, q, r = (rand_pts(500, seed=s) for s in (14, 15, 16))
        lhs = geo.koranyi_dist_arr(p, r)
        rhs = geo.koranyi_dist_arr(p, q) + geo.koranyi_dist_arr(q, r)
        assert np.all(lhs <= rhs * (1 + 1e-13))

    def test_left_invariance(self):
        p, q, g = (rand_pts(300, seed=s) for s in (17, 18, 19))
        lhs = geo.koranyi_dist_arr(geo.mul(g, p), geo.mul(g, q))
        assert np.allclose(lhs, geo.koranyi_dist_arr(p, q), rtol=1e-11,
                           atol=1e-12)


# ---------------------------------------------------------------------------
# Sub-Riemannian distance: anchors and an ODE-shooting oracle.

def _shoot(theta, curv, length):
    """Endpoint of the unit-speed horizontal geodesic from the origin with
    initial heading theta and curvature parameter curv, by direct
    integration of the horizontality ODE (independent of the solver
    under test)."""
    def rhs(s, state):
        x, y, _ = state
        dx = math.cos(theta + curv * s)
        dy = math.sin(theta + curv * s)
        return [dx, dy, 2.0 * (y * dx - x * dy)]

    sol = solve_ivp(rhs, (0.0, length), [0.0, 0.0, 0.0], rtol=1e-12,
                    atol=1e-14, dense_output=False)
    return sol.y[:, -1]


class TestSubRiemannian:
    def test_horizontal_anchor(self):
        # d(0, (x, y, 0)) = sqrt(x^2 + y^2).
        pts = rand_pts(200, seed=20)
        pts[:, 2] = 0.0
        d = geo.sr_dist_from_origin_arr(pts)
        assert np.allclose(d, np.hypot(pts[:, 0], pts[:, 1]), rtol=1e-9)

    def test_vertical_anchor(self):
        # d(0, (0, 0, t)) = sqrt(pi |t|).
        for t in (1e-4, 0.3, 2.0, 50.0):
            d = float(geo.sr_dist_from_origin_arr([0.0, 0.0, t]))
            assert abs(d / math.sqrt(math.pi * t) - 1) < 1e-6

    def test_ode_shooting_oracle(self):
        # Shoot geodesics within the injectivity bound |curv|*L < 2*pi and
        # check that the claimed distance to the endpoint equals the arc
        # length used to generate it.
        cases = [(0.3, 0.5, 1.2), (1.1, 2.0, 2.8), (-0.4, -3.0, 1.9),
                 (2.0, 1.0, 0.7), (0.0, 5.0, 1.0), (1.5, -0.2, 3.0)]
        for theta, curv, length in cases:
            assert abs(curv) * length < 2.0 * math.pi
            end = _shoot(theta, curv, length)
            d = float(geo.sr_dist_from_origin_arr(end))
            assert abs(d / length - 1) < 1e-7, (theta, curv, length, d)

    def test_symmetry_and_left_invariance(self):
        p, q, g = (rand_pts(200, seed=s) for s in (21, 22, 23))
        d = geo.sr_dist_arr(p, q)
        assert np.allclose(d, geo.sr_dist_arr(q, p), rtol=1e-8)
        assert np.allclose(geo.sr_dist_arr(geo.mul(g, p), geo.mul(g, q)), d,
                           rtol=1e-8)

    def test_homogeneity(self):
        p = rand_pts(200, seed=24)
        for lam in (0.25, 4.0):
            d = geo.sr_dist_from_origin_arr(geo.dilate_arr(lam, p))
            assert np.allclose(d, lam * geo.sr_dist_from_origin_arr(p),
                               rtol=1e-8)

    def test_triangle_inequality(self):
        p, q, r = (rand_pts(300, seed=s) for s in (25, 26, 27))
        lhs = geo.sr_dist_arr(p, r)
        rhs = geo.sr_dist_arr(p, q) + geo.sr_dist_arr(q, r)
        assert np.all(lhs <= rhs * (1 + 1e-9))

    def test_metric_sandwich(self):
        # (1/sqrt(pi)) d_s <= d_K <= d_s pointwise.
        p, q = rand_pts(2000, seed=28), rand_pts(2000, seed=29)
        ds = geo.sr_dist_arr(p, q)
        dk = geo.koranyi_dist_arr(p, q)
        assert np.all(dk <= ds * (1 + 1e-9))
        assert np.all(ds <= math.sqrt(math.pi) * dk * (1 + 1e-9))

    def test_dist_dispatch(self):
        p, q = Point(0.3, -0.2, 0.4), Point(-1.0, 0.5, -0.1)
        assert geo.dist(Metric.KORANYI, p, q) == pytest.approx(
            float(geo.koranyi_dist_arr(p.as_array(), q.as_array())))
        assert geo.dist(Metric.SUB_RIEMANNIAN, p, q) == pytest.approx(
            float(geo.sr_dist_arr(p.as_array(), q.as_array())))


# ---------------------------------------------------------------------------
# Balls, curves, volumes.

class TestBallsCurves:
    def test_ball_validation(self):
        with pytest.raises(InvalidArgumentError):
            Ball(Point(0, 0, 0), 0.0, Metric.KORANYI)
        with pytest.raises(InvalidArgumentError):
            Ball(Point(0, 0, 0), -1.0, Metric.KORANYI)

    def test_ball_contains_and_dilated(self):
        b = Ball(Point(0.5, 0.0, 0.0), 0.4, Metric.KORANYI)
        assert b.contains(Point(0.5, 0.0, 0.0))
        assert not b.contains(Point(2.0, 0.0, 0.0))
        assert b.dilated(2.0).radius == pytest.approx(0.8)
        assert b.dilated(2.0).center == b.center

    def test_curve_validation(self):
        with pytest.raises(InvalidArgumentError):
            Curve((Point(0, 0, 0),))
        with pytest.raises(InvalidArgumentError):
            Curve((Point(0, 0, 0), Point(0, 0, 0)))

    def test_curve_length_matches_segments(self):
        arr = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0]], dtype=float)
        c = Curve.from_array(arr)
        seg = geo.koranyi_dist_arr(arr[1:], arr[:-1])
        assert geo.curve_length(c) == pytest.approx(float(np.sum(seg)))
        assert geo.polyline_length_arr(arr) == pytest.approx(
            geo.curve_length(c))

    def test_koranyi_ball_volume_formula(self):
        assert geo.koranyi_ball_volume(1.0) == pytest.approx(math.pi ** 2 / 2)
        assert geo.koranyi_ball_volume(2.0) == pytest.approx(
            16 * geo.koranyi_ball_volume(1.0))
        with pytest.raises(InvalidArgumentError):
            geo.koranyi_ball_volume(0.0)

    def test_koranyi_ball_volume_monte_carlo(self):
        rng = np.random.default_rng(30)
        n = 200000
        pts = rng.uniform([-1, -1, -1], [1, 1, 1], size=(n, 3))
        frac = float(np.mean(geo.gauge(pts) < 1.0))
        assert abs(frac * 8.0 / geo.koranyi_ball_volume(1.0) - 1) < 0.02

    def test_sr_ball_volume_monte_carlo(self):
        rng = np.random.default_rng(31)
        n = 200000
        pts = rng.uniform([-1, -1, -1], [1, 1, 1], size=(n, 3))
        frac = float(np.mean(geo.sr_dist_from_origin_arr(pts) < 1.0))
        vol = geo.ball_volume(Ball(Point(0, 0, 0), 1.0,
                                   Metric.SUB_RIEMANNIAN))
        assert abs(frac * 8.0 / vol - 1) < 0.02

    def test_sr_ball_volume_scaling(self):
        v1 = geo.ball_volume(Ball(Point(0, 0, 0), 1.0,
                                  Metric.SUB_RIEMANNIAN))
        v3 = geo.ball_volume(Ball(Point(1, 2, 3), 3.0,
                                  Metric.SUB_RIEMANNIAN))
        assert v3 == pytest.approx(81.0 * v1)

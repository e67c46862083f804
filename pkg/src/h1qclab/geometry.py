"""Heisenberg group arithmetic and the two canonical metrics.

Coordinates are exponential coordinates (x, y, t) with group law

    (x, y, t) (x', y', t') = (x + x', y + y', t + t' - 2xy' + 2x'y)

and the left-invariant horizontal frame X = d/dx + 2y d/dt,
Y = d/dy - 2x d/dt.  Dilations act by (x, y, t) -> (lx, ly, l^2 t).

The Koranyi distance is d(p, q) = gauge(q^{-1} p) with
gauge(x, y, t) = ((x^2 + y^2)^2 + t^2)^(1/4); symmetry follows from
gauge(g) = gauge(g^{-1}).  The sub-Riemannian distance is the infimal
length of horizontal curves.  Horizontal lifts of circular arcs are the
geodesics; matching the endpoint reduces to a monotone scalar equation
in the arc angle, solved here by vectorized bisection plus Newton
polish (tolerance TOL_GEO).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericFailure

TOL_GEO = 1e-9

_TWO_PI = 2.0 * math.pi


class Metric(enum.Enum):
    KORANYI = "koranyi"
    SUB_RIEMANNIAN = "sub-riemannian"


@dataclass(frozen=True)
class Point:
    x: float
    y: float
    t: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.t)):
            raise InvalidArgumentError(f"non-finite point coordinates {(self.x, self.y, self.t)}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.t], dtype=float)

    @staticmethod
    def from_array(a) -> "Point":
        return Point(float(a[0]), float(a[1]), float(a[2]))


ORIGIN = Point(0.0, 0.0, 0.0)


# ---------------------------------------------------------------------------
# Vectorized internals.  Arrays are shape (..., 3).

def mul(a, b):
    """Group product on arrays of shape (..., 3)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=float)
    out[..., 0] = a[..., 0] + b[..., 0]
    out[..., 1] = a[..., 1] + b[..., 1]
    out[..., 2] = a[..., 2] + b[..., 2] - 2.0 * a[..., 0] * b[..., 1] + 2.0 * b[..., 0] * a[..., 1]
    return out


def inv(a):
    """Group inverse on arrays: (x, y, t) -> (-x, -y, -t)."""
    return -np.asarray(a, dtype=float)


def gauge(a):
    """Koranyi gauge ((x^2+y^2)^2 + t^2)^(1/4) on arrays of shape (..., 3)."""
    a = np.asarray(a, dtype=float)
    rho2 = a[..., 0] ** 2 + a[..., 1] ** 2
    return (rho2 * rho2 + a[..., 2] ** 2) ** 0.25


def dilate_arr(lam, a):
    a = np.asarray(a, dtype=float)
    lam = np.asarray(lam, dtype=float)
    out = np.empty(np.broadcast_shapes(np.shape(lam) + (1,), a.shape), dtype=float)
    out[..., 0] = lam * a[..., 0]
    out[..., 1] = lam * a[..., 1]
    out[..., 2] = lam * lam * a[..., 2]
    return out


def koranyi_dist_arr(p, q):
    """Koranyi distance d(p, q) = gauge(q^{-1} p), vectorized."""
    return gauge(mul(inv(q), p))


def _arc_angle(v):
    """Solve (w - sin w) = 2 v sin^2(w/2) for w in (0, 2*pi), vectorized.

    v = |t| / (x^2 + y^2) for the endpoint of a geodesic from the origin.
    The left side minus the right side is negative near 0 and equals
    2*pi at w = 2*pi, with a single root for v > 0.
    """
    v = np.asarray(v, dtype=float)
    lo = np.full(v.shape, 1e-14)
    hi = np.full(v.shape, _TWO_PI)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        h = (mid - np.sin(mid)) - 2.0 * v * np.sin(0.5 * mid) ** 2
        neg = h < 0.0
        lo = np.where(neg, mid, lo)
        hi = np.where(neg, hi, mid)
    w = 0.5 * (lo + hi)
    # Newton polish; derivative 2 sin^2(w/2) - v sin(w) stays positive at the root.
    for _ in range(3):
        h = (w - np.sin(w)) - 2.0 * v * np.sin(0.5 * w) ** 2
        dh = (1.0 - np.cos(w)) - v * np.sin(w)
        step = np.where(np.abs(dh) > 1e-300, h / np.where(dh == 0.0, 1.0, dh), 0.0)
        w = np.clip(w - step, 1e-14, _TWO_PI)
    return w


def sr_dist_from_origin_arr(a):
    """Sub-Riemannian distance from the origin, vectorized over (..., 3)."""
    a = np.asarray(a, dtype=float)
    r = np.hypot(a[..., 0], a[..., 1])
    at = np.abs(a[..., 2])
    out = np.empty(r.shape, dtype=float)

    plane = at <= 1e-300
    axis = (r <= 1e-300) & ~plane
    generic = ~(plane | axis)

    out[plane] = r[plane]
    out[axis] = np.sqrt(math.pi * at[axis])
    if np.any(generic):
        rg = r[generic]
        v = at[generic] / (rg * rg)
        w = _arc_angle(v)
        half = 0.5 * w
        out[generic] = rg * half / np.sin(half)
    if not np.all(np.isfinite(out)):
        raise NumericFailure(
            "sub-Riemannian geodesic solver produced non-finite distances",
            diagnostics={"bad_count": int(np.sum(~np.isfinite(out)))},
        )
    return out


def sr_dist_arr(p, q):
    """Sub-Riemannian distance, vectorized: d_s(p, q) = d_s(0, q^{-1} p)."""
    return sr_dist_from_origin_arr(mul(inv(q), p))


def dist_arr(metric: Metric, p, q):
    if metric is Metric.KORANYI:
        return koranyi_dist_arr(p, q)
    return sr_dist_arr(p, q)


# ---------------------------------------------------------------------------
# Point-level API.

def group_mul(p: Point, q: Point) -> Point:
    return Point.from_array(mul(p.as_array(), q.as_array()))


def group_inv(p: Point) -> Point:
    return Point(-p.x, -p.y, -p.t)


def dilate(lam: float, p: Point) -> Point:
    if not (lam > 0.0 and math.isfinite(lam)):
        raise InvalidArgumentError(f"dilation factor must be positive and finite, got {lam}")
    return Point(lam * p.x, lam * p.y, lam * lam * p.t)


def koranyi_norm(p: Point) -> float:
    return float(gauge(p.as_array()))


def dist(metric: Metric, p: Point, q: Point) -> float:
    return float(dist_arr(metric, p.as_array(), q.as_array()))


@dataclass(frozen=True)
class Ball:
    center: Point
    radius: float
    metric: Metric

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise InvalidArgumentError(f"ball radius must be positive and finite, got {self.radius}")

    def dilated(self, m: float) -> "Ball":
        """mB := B(center, m * radius)."""
        return Ball(self.center, m * self.radius, self.metric)

    def contains_arr(self, pts) -> np.ndarray:
        return dist_arr(self.metric, pts, self.center.as_array()) < self.radius

    def contains(self, p: Point) -> bool:
        return dist(self.metric, p, self.center) < self.radius


@dataclass(frozen=True)
class Curve:
    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise InvalidArgumentError("a curve needs at least two vertices")
        arr = self.as_array()
        seg = koranyi_dist_arr(arr[1:], arr[:-1])
        if np.any(seg == 0.0):
            raise InvalidArgumentError("consecutive curve vertices must be distinct")
        if not np.all(np.isfinite(seg)):
            raise InvalidArgumentError("curve has non-finite segment lengths")

    def as_array(self) -> np.ndarray:
        return np.array([[p.x, p.y, p.t] for p in self.vertices], dtype=float)

    @staticmethod
    def from_array(arr) -> "Curve":
        return Curve(tuple(Point.from_array(row) for row in np.asarray(arr, dtype=float)))


def curve_length(gamma: Curve) -> float:
    """Sum of Koranyi distances of consecutive vertices."""
    arr = gamma.as_array()
    return float(np.sum(koranyi_dist_arr(arr[1:], arr[:-1])))


def polyline_length_arr(arr) -> float:
    arr = np.asarray(arr, dtype=float)
    return float(np.sum(koranyi_dist_arr(arr[1:], arr[:-1])))


def koranyi_ball_volume(r: float) -> float:
    """Lebesgue (Haar) volume of a Koranyi ball: pi^2 r^4 / 2."""
    if not (r > 0.0 and math.isfinite(r)):
        raise InvalidArgumentError(f"radius must be positive and finite, got {r}")
    return 0.5 * math.pi ** 2 * r ** 4


def ball_volume(ball: Ball) -> float:
    """Haar volume of a metric ball.

    Koranyi balls have the closed form pi^2 r^4 / 2.  Sub-Riemannian unit
    ball volume is a universal constant, computed once by high-resolution
    quadrature and scaled by homogeneity (volume ~ r^4).
    """
    if ball.metric is Metric.KORANYI:
        return koranyi_ball_volume(ball.radius)
    return _SR_UNIT_BALL_VOLUME * ball.radius ** 4


def _sr_unit_ball_volume() -> float:
    # The SR unit ball is rotation-invariant: {(rho, t): d_s(0,(rho,0,t)) < 1}.
    # Integrate 2*pi*rho * (t-extent) over rho on a fine grid.
    n = 4000
    rho = (np.arange(n) + 0.5) / n
    # For fixed rho < 1 the ball section is |t| < T(rho) with d_s(0,(rho,0,T)) = 1.
    # Invert the geodesic formula: distance = rho*(w/2)/sin(w/2) with
    # (w - sin w) = 2 (T/rho^2) sin^2(w/2).  Solve for w from the distance.
    # rho = sin(w/2)/(w/2) for unit distance; bisection on w.
    lo = np.full(n, 1e-12)
    hi = np.full(n, _TWO_PI - 1e-12)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        f = np.sin(0.5 * mid) / (0.5 * mid) - rho
        pos = f > 0.0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
    w = 0.5 * (lo + hi)
    T = rho * rho * (w - np.sin(w)) / (2.0 * np.sin(0.5 * w) ** 2)
    return float(np.sum(2.0 * math.pi * rho * 2.0 * T) / n)


_SR_UNIT_BALL_VOLUME = _sr_unit_ball_volume()

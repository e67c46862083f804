"""Catalog of explicit quasiconformal maps and their differentials.

The horizontal differential D_Hf is the 2x2 matrix of derivatives of the
first two components of f along the left-invariant frame, computed either
analytically (affine catalog members, shears) or by central finite
differences along the group flows s -> p.(s,0,0) and s -> p.(0,s,0).
The Jacobian is (det D_Hf)^2 and the distortion is |D_Hf|_op^4 / J_f.

The contact defect compares the vertical derivative, taken as a group
difference d/dh [f(p)^{-1} f(p.(0,0,h))]_3, with det D_Hf; both equal
the vertical scaling factor for contact maps, so the defect vanishes to
O(h^2) exactly when f respects the contact structure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import sympy

from . import dsl as _dsl
from . import geometry as geo
from .errors import (DegenerateMapError, InvalidArgumentError, MapDomainError,
                     NumericFailure)
from .geometry import Metric, Point
from .streams import stream


def default_fd_step(pts) -> np.ndarray:
    """Central-difference step 1e-5 * (1 + gauge), balancing truncation
    against cancellation at double precision."""
    return 1e-5 * (1.0 + geo.gauge(pts))


@dataclass(frozen=True)
class HorizontalDifferential:
    m11: float
    m12: float
    m21: float
    m22: float
    det: float
    op_norm: float
    jacobian: float
    distortion: float


class SmoothMap:
    """Base class: an evaluatable map of the group to itself."""

    name = "map"

    def apply_arr(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def apply(self, p: Point) -> Point:
        return Point.from_array(self.apply_arr(p.as_array()[None, :])[0])

    def horizontal_matrix_arr(self, pts: np.ndarray):
        """Analytic D_H as an (..., 2, 2) array, or None if unavailable."""
        return None

    def jacobian_arr(self, pts: np.ndarray, fd_step=None) -> np.ndarray:
        """(det D_H)^2, analytic when the matrix is, else finite-difference."""
        m = self.horizontal_matrix_arr(pts)
        if m is None:
            m = horizontal_matrix_fd(self, pts, fd_step)
        det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
        return det * det

    def valid_arr(self, pts: np.ndarray) -> np.ndarray:
        """Mask of points in the map's domain of validity."""
        return np.ones(np.asarray(pts).shape[:-1], dtype=bool)

    def describe(self) -> dict:
        return {"kind": self.name}


# ---------------------------------------------------------------------------
# Catalog members.

class LeftTranslation(SmoothMap):
    name = "left-translation"

    def __init__(self, g: Point):
        self.g = g
        self._g = g.as_array()

    def apply_arr(self, pts):
        return geo.mul(self._g, pts)

    def horizontal_matrix_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(np.eye(2), pts.shape[:-1] + (2, 2)).copy()

    def describe(self):
        return {"kind": self.name, "g": [self.g.x, self.g.y, self.g.t]}


class Dilation(SmoothMap):
    name = "dilation"

    def __init__(self, lam: float):
        if not (lam > 0.0 and math.isfinite(lam)):
            raise InvalidArgumentError(f"dilation factor must be positive, got {lam}")
        self.lam = float(lam)

    def apply_arr(self, pts):
        return geo.dilate_arr(self.lam, pts)

    def horizontal_matrix_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.broadcast_to(self.lam * np.eye(2), pts.shape[:-1] + (2, 2)).copy()

    def jacobian_arr(self, pts, fd_step=None):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], self.lam ** 4)

    def describe(self):
        return {"kind": self.name, "lambda": self.lam}


class Rotation(SmoothMap):
    """Rotation of the horizontal plane about the t-axis; an isometry."""

    name = "rotation"

    def __init__(self, theta: float):
        self.theta = float(theta)
        self._c = math.cos(self.theta)
        self._s = math.sin(self.theta)

    def apply_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = self._c * pts[..., 0] - self._s * pts[..., 1]
        out[..., 1] = self._s * pts[..., 0] + self._c * pts[..., 1]
        out[..., 2] = pts[..., 2]
        return out

    def horizontal_matrix_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        r = np.array([[self._c, -self._s], [self._s, self._c]])
        return np.broadcast_to(r, pts.shape[:-1] + (2, 2)).copy()

    def jacobian_arr(self, pts, fd_step=None):
        pts = np.asarray(pts, dtype=float)
        return np.ones(pts.shape[:-1])

    def describe(self):
        return {"kind": self.name, "theta": self.theta}


class HorizontalStretch(SmoothMap):
    """(x, y, t) -> (a x, y / a, t): a group automorphism with J = 1 and
    constant distortion max(a, 1/a)^4."""

    name = "horizontal-stretch"

    def __init__(self, a: float):
        if not (a > 0.0 and math.isfinite(a)):
            raise InvalidArgumentError(f"stretch factor must be positive, got {a}")
        self.a = float(a)

    def apply_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.empty_like(pts)
        out[..., 0] = self.a * pts[..., 0]
        out[..., 1] = pts[..., 1] / self.a
        out[..., 2] = pts[..., 2]
        return out

    def horizontal_matrix_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        m = np.diag([self.a, 1.0 / self.a])
        return np.broadcast_to(m, pts.shape[:-1] + (2, 2)).copy()

    def jacobian_arr(self, pts, fd_step=None):
        pts = np.asarray(pts, dtype=float)
        return np.ones(pts.shape[:-1])

    def describe(self):
        return {"kind": self.name, "a": self.a}


class Shear(SmoothMap):
    """F(x, y, t) = (x, y + phi(x), t + 4 Phi(x) - 2 x phi(x)) with
    Phi' = phi.  The t-component is chosen so that the contact form
    dt - 2y dx + 2x dy pulls back to itself, giving an exactly contact
    map with D_H = [[1, 0], [phi'(x), 1]] and J = 1."""

    name = "shear"

    def __init__(self, phi_src: str):
        self.phi_src = str(phi_src)
        xs = sympy.Symbol("x")
        transforms = sympy.parsing.sympy_parser.standard_transformations + (
            sympy.parsing.sympy_parser.convert_xor,)
        try:
            phi = sympy.parsing.sympy_parser.parse_expr(
                self.phi_src, local_dict={"x": xs}, transformations=transforms)
        except Exception as exc:
            raise InvalidArgumentError(f"cannot parse shear profile {phi_src!r}: {exc}")
        extra = phi.free_symbols - {xs}
        if extra:
            raise InvalidArgumentError(
                f"shear profile may depend on x only, found {sorted(map(str, extra))}")
        big_phi = sympy.integrate(phi, xs)
        if big_phi.has(sympy.Integral):
            raise InvalidArgumentError(
                f"shear profile {phi_src!r} has no closed-form antiderivative")
        self._phi = sympy.lambdify(xs, phi, "numpy")
        self._phi_prime = sympy.lambdify(xs, sympy.diff(phi, xs), "numpy")
        self._big_phi = sympy.lambdify(xs, big_phi, "numpy")

    def apply_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        phi = np.broadcast_to(self._phi(x), x.shape)
        big = np.broadcast_to(self._big_phi(x), x.shape)
        out = np.empty_like(pts)
        out[..., 0] = x
        out[..., 1] = pts[..., 1] + phi
        out[..., 2] = pts[..., 2] + 4.0 * big - 2.0 * x * phi
        return out

    def horizontal_matrix_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        x = pts[..., 0]
        m = np.zeros(x.shape + (2, 2))
        m[..., 0, 0] = 1.0
        m[..., 1, 0] = np.broadcast_to(self._phi_prime(x), x.shape)
        m[..., 1, 1] = 1.0
        return m

    def jacobian_arr(self, pts, fd_step=None):
        pts = np.asarray(pts, dtype=float)
        return np.ones(pts.shape[:-1])

    def describe(self):
        return {"kind": self.name, "phi": self.phi_src}


class KoranyiInversion(SmoothMap):
    """Inversion in the unit gauge sphere:

        sigma(z, t) = (z / (|z|^2 - i t), -t / (|z|^4 + t^2)),  z = x + iy.

    Validated invariants: involution, gauge reciprocity
    |sigma(p)| |p| = 1, conformality (distortion 1, contact defect 0),
    Jacobian |p|^{-8}.  Defined away from the group identity."""

    name = "koranyi-inversion"

    def apply_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y, t = pts[..., 0], pts[..., 1], pts[..., 2]
        rho2 = x * x + y * y
        denom = rho2 * rho2 + t * t
        if np.any(denom == 0.0):
            raise MapDomainError("inversion evaluated at the group identity")
        out = np.empty_like(pts)
        # z / (|z|^2 - i t) = z (|z|^2 + i t) / (|z|^4 + t^2)
        out[..., 0] = (x * rho2 - y * t) / denom
        out[..., 1] = (y * rho2 + x * t) / denom
        out[..., 2] = -t / denom
        return out

    def jacobian_arr(self, pts, fd_step=None):
        return geo.gauge(np.asarray(pts, dtype=float)) ** -8.0

    def valid_arr(self, pts):
        return geo.gauge(np.asarray(pts, dtype=float)) > 0.0


class Composition(SmoothMap):
    """Composition(maps) applies right-to-left: maps[-1] first."""

    name = "composition"

    def __init__(self, maps):
        maps = list(maps)
        if not maps:
            raise InvalidArgumentError("composition needs at least one map")
        self.maps = maps

    def apply_arr(self, pts):
        out = np.asarray(pts, dtype=float)
        for m in reversed(self.maps):
            out = m.apply_arr(out)
        return out

    def valid_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        cur = pts
        for m in reversed(self.maps):
            ok &= m.valid_arr(cur)
            cur = m.apply_arr(np.where(ok[..., None], cur, 1.0))
        return ok

    def describe(self):
        return {"kind": self.name, "maps": [m.describe() for m in self.maps]}


class UserDSL(SmoothMap):
    name = "dsl"

    def __init__(self, fx: str, fy: str, ft: str):
        self.sources = (str(fx), str(fy), str(ft))
        self._fns = tuple(_dsl.compile_expression(s) for s in self.sources)

    @staticmethod
    def from_source(src: str) -> "UserDSL":
        """Parse "fx, fy, ft" (one comma-separated string)."""
        m = UserDSL.__new__(UserDSL)
        nodes = _dsl.parse_triple(src)
        m.sources = tuple(s.strip() for s in src.split(","))[:3]
        m._fns = tuple(
            (lambda x, y, t, _n=n: _dsl.evaluate(_n, x, y, t)) for n in nodes)
        return m

    def apply_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        x, y, t = pts[..., 0], pts[..., 1], pts[..., 2]
        out = np.empty_like(pts)
        for i, fn in enumerate(self._fns):
            out[..., i] = np.broadcast_to(fn(x, y, t), x.shape)
        if not np.all(np.isfinite(out)):
            raise NumericFailure("map expression produced non-finite values",
                                 diagnostics={"sources": self.sources})
        return out

    def describe(self):
        return {"kind": self.name, "fx": self.sources[0],
                "fy": self.sources[1], "ft": self.sources[2]}


def parse_map(src: str) -> UserDSL:
    """Compile "fx, fy, ft" into an evaluatable map."""
    return UserDSL.from_source(src)


# ---------------------------------------------------------------------------
# Differentials.

def horizontal_matrix_fd(f: SmoothMap, pts: np.ndarray, fd_step=None) -> np.ndarray:
    """Central-difference D_H along the group flows, shape (..., 2, 2)."""
    pts = np.asarray(pts, dtype=float)
    h = default_fd_step(pts) if fd_step is None else np.broadcast_to(
        np.asarray(fd_step, dtype=float), pts.shape[:-1])
    if np.any(h <= 0.0) or not np.all(np.isfinite(h)):
        raise NumericFailure("finite-difference step underflow",
                             diagnostics={"min_step": float(np.min(h))})
    m = np.empty(pts.shape[:-1] + (2, 2))
    for col, direction in enumerate((np.array([1.0, 0.0, 0.0]),
                                     np.array([0.0, 1.0, 0.0]))):
        step = h[..., None] * direction
        fp = f.apply_arr(geo.mul(pts, step))
        fm = f.apply_arr(geo.mul(pts, -step))
        diff = (fp - fm) / (2.0 * h[..., None])
        m[..., 0, col] = diff[..., 0]
        m[..., 1, col] = diff[..., 1]
    if not np.all(np.isfinite(m)):
        raise NumericFailure("non-finite horizontal differential",
                             diagnostics={"map": f.name})
    return m


def horizontal_matrix(f: SmoothMap, pts: np.ndarray, fd_step=None) -> np.ndarray:
    m = f.horizontal_matrix_arr(pts)
    if m is None:
        m = horizontal_matrix_fd(f, pts, fd_step)
    return m


def op_norm_2x2(m: np.ndarray) -> np.ndarray:
    """Largest singular value of (..., 2, 2) matrices, closed form."""
    a, b = m[..., 0, 0], m[..., 0, 1]
    c, d = m[..., 1, 0], m[..., 1, 1]
    frob2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    gap = np.sqrt(np.maximum(frob2 * frob2 - 4.0 * det * det, 0.0))
    return np.sqrt(0.5 * (frob2 + gap))


def distortion_arr(f: SmoothMap, pts: np.ndarray, fd_step=None) -> np.ndarray:
    m = horizontal_matrix(f, pts, fd_step)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    jac = det * det
    with np.errstate(divide="ignore", invalid="ignore"):
        k = op_norm_2x2(m) ** 4 / jac
    return np.where(jac > 0.0, k, np.inf)


def horizontal_differential(f: SmoothMap, p: Point, fd_step=None) -> HorizontalDifferential:
    m = horizontal_matrix(f, p.as_array()[None, :], fd_step)[0]
    det = float(m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0])
    jac = det * det
    op = float(op_norm_2x2(m[None, ...])[0])
    distortion = op ** 4 / jac if jac > 0.0 else math.inf
    return HorizontalDifferential(float(m[0, 0]), float(m[0, 1]),
                                  float(m[1, 0]), float(m[1, 1]),
                                  det, op, jac, distortion)


def contact_defect_arr(f: SmoothMap, pts: np.ndarray, fd_step=None) -> np.ndarray:
    """|d/dh [f(p)^{-1} f(p.(0,0,h))]_3 / 2 ... | vs det D_H, vectorized.

    The group difference removes the base value f(p), so its third
    component measures the genuine vertical displacement of the image;
    its derivative equals det D_H exactly for contact maps.
    """
    pts = np.asarray(pts, dtype=float)
    h = default_fd_step(pts) if fd_step is None else np.broadcast_to(
        np.asarray(fd_step, dtype=float), pts.shape[:-1])
    # The vertical coordinate scales like length squared; (1e-5(1+|p|))^2
    # would be cancellation-dominated, so the vertical step uses its own
    # balance point.
    hv = 1e-4 * (1.0 + geo.gauge(pts)) ** 2 if fd_step is None else h * h
    base_inv = geo.inv(f.apply_arr(pts))

    def central(step_t):
        step = np.zeros(pts.shape)
        step[..., 2] = step_t
        wp = geo.mul(base_inv, f.apply_arr(geo.mul(pts, step)))[..., 2]
        wm = geo.mul(base_inv, f.apply_arr(geo.mul(pts, -step)))[..., 2]
        return (wp - wm) / (2.0 * step_t)

    # One Richardson extrapolation knocks out the O(h^2) truncation term,
    # which dominates wherever the map has strong vertical curvature.
    d1 = central(hv)
    d2 = central(0.5 * hv)
    vertical = (4.0 * d2 - d1) / 3.0
    m = horizontal_matrix(f, pts, fd_step)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return np.abs(vertical - det)


def contact_defect(f: SmoothMap, p: Point, fd_step=None) -> float:
    return float(contact_defect_arr(f, p.as_array()[None, :], fd_step)[0])


def distortion_scan(f: SmoothMap, dom, n: int, seed: int, fd_step=None) -> dict:
    """Max pointwise distortion over n interior samples."""
    if n < 1:
        raise InvalidArgumentError(f"need n >= 1, got {n}")
    pts = dom.sample_interior_arr(n, seed)
    pts = pts[f.valid_arr(pts)]
    m = horizontal_matrix(f, pts, fd_step)
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    jac = det * det
    if np.any(jac <= 0.0):
        bad = int(np.argmax(jac <= 0.0))
        raise DegenerateMapError(
            f"nonpositive Jacobian during distortion scan of {f.name}",
            point=Point.from_array(pts[bad]))
    k = op_norm_2x2(m) ** 4 / jac
    worst = int(np.argmax(k))
    return {"K_hat": float(k[worst]), "worst_point": Point.from_array(pts[worst])}


def radial_stretch_axis(k_exp: float, r) -> np.ndarray:
    """Gauge-norm action r -> r^k of the radial stretch, restricted to the
    positive x-axis (the only closed-form slice used here)."""
    if not (k_exp > 0.0):
        raise InvalidArgumentError(f"exponent must be positive, got {k_exp}")
    return np.asarray(r, dtype=float) ** k_exp


# ---------------------------------------------------------------------------
# Config plumbing.

def map_from_config(cfg: dict) -> SmoothMap:
    kind = cfg.get("kind")
    if kind == "left-translation":
        return LeftTranslation(Point(*cfg["g"]))
    if kind == "dilation":
        return Dilation(float(cfg["lambda"]))
    if kind == "rotation":
        return Rotation(float(cfg["theta"]))
    if kind in ("horizontal-stretch", "HorizontalStretch"):
        return HorizontalStretch(float(cfg["a"]))
    if kind == "shear":
        return Shear(cfg["phi"])
    if kind == "koranyi-inversion":
        return KoranyiInversion()
    if kind == "composition":
        return Composition([map_from_config(c) for c in cfg["maps"]])
    if kind == "dsl":
        return UserDSL(cfg["fx"], cfg["fy"], cfg["ft"])
    raise InvalidArgumentError(f"unknown map kind {kind!r}")

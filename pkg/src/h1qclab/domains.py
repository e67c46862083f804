"""Region oracles: membership, boundary distance, interior sampling.

Four domain kinds are supported: Korányi balls and annuli (bounded by
gauge spheres), the punctured group, and Euclidean coordinate boxes.
Boundary distance for the punctured space is exact; for the gauge-sphere
and box boundaries it is computed by minimizing the metric distance over
a parametrized boundary patch with several levels of local grid
refinement.  Refined values are distances to actual boundary points, so
they upper-bound the infimum; a radius-minus-gauge lower bracket is used
wherever the triangle inequality provides one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import InvalidArgumentError, SamplingFailure
from .geometry import Metric, Point
from .streams import stream

_ACCEPT_FLOOR = 1e-6


# ---------------------------------------------------------------------------
# Boundary patches and the refining minimizer.

@dataclass(frozen=True)
class _Patch:
    """A 2-parameter boundary piece: (u, v) in a rectangle -> points."""

    u_lo: float
    u_hi: float
    v_lo: float
    v_hi: float
    mapper: callable

    def points(self, u, v):
        return self.mapper(np.asarray(u, dtype=float), np.asarray(v, dtype=float))


def _gauge_sphere_patch(center: np.ndarray, radius: float) -> _Patch:
    # (sqrt(cos s) cos a, sqrt(cos s) sin a, sin s) sweeps the unit gauge
    # sphere for a in [0, 2pi), s in [-pi/2, pi/2]; dilate and left-translate.
    def mapper(a, s):
        s = np.clip(s, -0.5 * math.pi, 0.5 * math.pi)
        rho = np.sqrt(np.maximum(np.cos(s), 0.0))
        q = np.stack([rho * np.cos(a), rho * np.sin(a), np.sin(s)], axis=-1)
        return geo.mul(center, geo.dilate_arr(radius, q))

    return _Patch(0.0, 2.0 * math.pi, -0.5 * math.pi, 0.5 * math.pi, mapper)


def _box_face_patches(bounds) -> list:
    """(patch, (u_axis, v_axis)) for each box face; the axis pair gives the
    point coordinates that seed the refinement (in-plane projection)."""
    (x0, x1), (y0, y1), (t0, t1) = bounds
    patches = []

    def face(axis, value, lo1, hi1, lo2, hi2):
        idx = [0, 1, 2]
        idx.remove(axis)

        def mapper(u, v, axis=axis, value=value, idx=tuple(idx)):
            out = np.empty(u.shape + (3,), dtype=float)
            out[..., axis] = value
            out[..., idx[0]] = u
            out[..., idx[1]] = v
            return out

        patches.append((_Patch(lo1, hi1, lo2, hi2, mapper), tuple(idx)))

    face(0, x0, y0, y1, t0, t1)
    face(0, x1, y0, y1, t0, t1)
    face(1, y0, x0, x1, t0, t1)
    face(1, y1, x0, x1, t0, t1)
    face(2, t0, x0, x1, y0, y1)
    face(2, t1, x0, x1, y0, y1)
    return patches


# ---------------------------------------------------------------------------
# Distance to a centered gauge sphere (Korányi metric).
#
# After translating the center away and rescaling, the distance from
# w = (z, t) to the unit gauge sphere depends only on rho = |z| and
# tau = t.  Writing the sphere point as q = (r cos b, r sin b, sig v)
# with r^4 = 1 - v^2, v in [0, 1], sig = +-1, the fourth power of the
# gauge of q^{-1} w is
#
#     A = (rho^2 + r^2 - 2 rho r cos b)^2
#         + (tau - sig v - 2 rho r sin b)^2,
#
# an explicit scalar expression.  It is minimized by a dense coarse grid
# over (b, v, sig) plus analytic seeds (radial projection, vertical
# match, cap candidate) and a shrinking local grid descent.  Every
# evaluation corresponds to an actual sphere point, so the result is an
# upper bound on the true distance; the descent makes it sharp.

def _sphere_a_value(rho, tau, b, v, sig):
    v = np.clip(v, 0.0, 1.0)
    r2 = np.sqrt(np.clip(1.0 - v * v, 0.0, 1.0))
    r = np.sqrt(r2)
    lat = rho * rho + r2 - 2.0 * rho * r * np.cos(b)
    vert = tau - sig * v - 2.0 * rho * r * np.sin(b)
    return lat * lat + vert * vert


def _sphere_descend(rho, tau, best, bb, bv, sig, hb, hv, levels=14, local=9):
    offs = np.linspace(-1.0, 1.0, local)
    ob, ov = np.meshgrid(offs, offs, indexing="ij")
    ob = ob.ravel()[None, :]
    ov = ov.ravel()[None, :]
    rho = rho[:, None]
    tau = tau[:, None]
    sig = sig[:, None]
    for _ in range(levels):
        cb = bb[:, None] + hb * ob
        cv = np.clip(bv[:, None] + hv * ov, 0.0, 1.0)
        a = _sphere_a_value(rho, tau, cb, cv, sig)
        j = np.argmin(a, axis=1)
        rows = np.arange(a.shape[0])
        better = a[rows, j] < best
        best = np.where(better, a[rows, j], best)
        bb = np.where(better, cb[rows, j], bb)
        bv = np.where(better, cv[rows, j], bv)
        hb /= 2.0
        hv /= 2.0
    return best


def _unit_sphere_dist_koranyi(w: np.ndarray) -> np.ndarray:
    """Korányi distance from each point w (N, 3) to the unit gauge
    sphere; works for points inside or outside the sphere."""
    w = np.asarray(w, dtype=float)
    rho = np.hypot(w[:, 0], w[:, 1])
    tau = w[:, 2]
    n = rho.shape[0]
    bb_grid = np.linspace(-math.pi, math.pi, 65)[:-1]
    vv_grid = np.linspace(0.0, 1.0, 129)
    hb = bb_grid[1] - bb_grid[0]
    hv = vv_grid[1] - vv_grid[0]

    best = np.full(n, np.inf)
    bb = np.zeros(n)
    bv = np.zeros(n)
    bs = np.ones(n)
    chunk = 1024
    for sig in (1.0, -1.0):
        for i in range(0, n, chunk):
            sl = slice(i, i + chunk)
            a = _sphere_a_value(rho[sl, None, None], tau[sl, None, None],
                                bb_grid[None, :, None], vv_grid[None, None, :],
                                sig)
            flat = a.reshape(a.shape[0], -1)
            j = np.argmin(flat, axis=1)
            rows = np.arange(flat.shape[0])
            better = flat[rows, j] < best[sl]
            best[sl] = np.where(better, flat[rows, j], best[sl])
            bb[sl] = np.where(better, bb_grid[j // vv_grid.size], bb[sl])
            bv[sl] = np.where(better, vv_grid[j % vv_grid.size], bv[sl])
            bs[sl] = np.where(better, sig, bs[sl])
    best = _sphere_descend(rho, tau, best, bb, bv, bs, hb, hv)

    # Analytic seeds, each descended on its own sheet.
    g = geo.gauge(w)
    sgn = np.where(tau == 0.0, 1.0, np.sign(tau))
    rho2 = rho * rho
    with np.errstate(divide="ignore", invalid="ignore"):
        r_rad = np.where(g > 0.0, rho / np.maximum(g, 1e-300), 0.0)
    seeds = []
    v_rad = np.sqrt(np.clip(1.0 - np.clip(r_rad, 0.0, 1.0) ** 4, 0.0, 1.0))
    seeds.append((np.zeros(n), v_rad, sgn))
    seeds.append((np.zeros(n), np.clip(np.abs(tau), 0.0, 1.0), sgn))
    v_cap = np.sqrt(np.clip(1.0 - rho2 * rho2, 0.0, 1.0))
    beta_cap = np.arcsin(np.clip(
        (tau - sgn * v_cap) / np.maximum(2.0 * rho2, 1e-300), -1.0, 1.0))
    seeds.append((beta_cap, v_cap, sgn))
    for b0, v0, s0 in seeds:
        a0 = _sphere_a_value(rho, tau, b0, v0, s0)
        best = np.minimum(best,
                          _sphere_descend(rho, tau, a0, b0, v0, s0, hb, hv))
    return np.power(best, 0.25)


def _centered_sphere_dist(pts, center, radius, metric: Metric) -> np.ndarray:
    """Distance from each point to the gauge sphere of the given center
    and radius."""
    pts = np.asarray(pts, dtype=float)
    if metric is Metric.KORANYI:
        w = geo.dilate_arr(1.0 / radius, geo.mul(geo.inv(center), pts))
        return radius * _unit_sphere_dist_koranyi(w)
    patch = _gauge_sphere_patch(center, radius)
    return _min_over_patch(pts, metric, patch,
                           seeds=_sphere_seeds(pts, center, radius))


def _sphere_seeds(pts, center, radius):
    """Two per-point refinement seeds on the gauge sphere: the radial
    projection (same latitude, rescaled gauge) and the vertical match
    (same azimuth, latitude chosen so the sphere point has the point's t
    coordinate).  The second lands inside the narrow valley where the
    group's vertical increment nearly cancels."""
    w = geo.dilate_arr(1.0 / radius, geo.mul(geo.inv(center), pts))
    g2 = np.maximum(geo.gauge(w) ** 2, 1e-300)
    u0 = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2.0 * math.pi)
    v_radial = np.arcsin(np.clip(w[:, 2] / g2, -1.0, 1.0))
    v_tmatch = np.arcsin(np.clip(w[:, 2], -1.0, 1.0))
    # Cap candidate: keep the point's cylindrical radius rho, put the
    # sphere point on the cap at height sign(t) sqrt(1 - rho^4), and
    # rotate the azimuth so the group's vertical increment
    # t - q_t - 2 rho^2 sin(beta) cancels.
    rho2 = w[:, 0] ** 2 + w[:, 1] ** 2
    cap_t = np.sign(np.where(w[:, 2] == 0.0, 1.0, w[:, 2])) \
        * np.sqrt(np.clip(1.0 - rho2 * rho2, 0.0, 1.0))
    beta = np.arcsin(np.clip((w[:, 2] - cap_t) / np.maximum(2.0 * rho2, 1e-300),
                             -1.0, 1.0))
    v_cap = np.arcsin(np.clip(cap_t, -1.0, 1.0))
    return [(u0, v_radial), (u0, v_tmatch),
            (np.mod(u0 + beta, 2.0 * math.pi), v_cap)]


def _refine_track(pts, metric, patch, best, bu, bv, hu, hv,
                  levels, local, shrink, chunk):
    """Local grid descent from per-point starts (bu, bv); in place."""
    n = pts.shape[0]
    offs = np.linspace(-1.0, 1.0, local)
    ou, ov = np.meshgrid(offs, offs, indexing="ij")
    ou = ou.ravel()
    ov = ov.ravel()
    for _ in range(levels):
        cu = np.clip(bu[:, None] + hu * ou[None, :], patch.u_lo, patch.u_hi)
        cv = np.clip(bv[:, None] + hv * ov[None, :], patch.v_lo, patch.v_hi)
        for i in range(0, n, chunk):
            q = patch.points(cu[i:i + chunk], cv[i:i + chunk])  # (m, L, 3)
            d = geo.dist_arr(metric, pts[i:i + chunk, None, :], q)
            j = np.argmin(d, axis=1)
            rows = np.arange(d.shape[0])
            improved = d[rows, j] < best[i:i + chunk]
            best[i:i + chunk] = np.where(improved, d[rows, j], best[i:i + chunk])
            bu[i:i + chunk] = np.where(improved, cu[i:i + chunk][rows, j], bu[i:i + chunk])
            bv[i:i + chunk] = np.where(improved, cv[i:i + chunk][rows, j], bv[i:i + chunk])
        # Shrink slowly enough that the refinement window can track a
        # narrow curved valley instead of locking onto its wall.
        hu /= shrink
        hv /= shrink


def _min_over_patch(pts: np.ndarray, metric: Metric, patch: _Patch,
                    coarse=(64, 32), levels=10, local=9, shrink=2.0,
                    seeds=None) -> np.ndarray:
    """Min distance from each point in pts (N, 3) to the patch.

    `seeds`, if given, is a list of per-point chart coordinate pairs
    (u0, v0) of guessed near-minimizers (e.g. a radial projection);
    extra refinement tracks start there, which keeps the descent out of
    wrong basins for points close to the patch."""
    n = pts.shape[0]
    gu, gv = coarse
    uu = np.linspace(patch.u_lo, patch.u_hi, gu)
    vv = np.linspace(patch.v_lo, patch.v_hi, gv)
    ug, vg = np.meshgrid(uu, vv, indexing="ij")
    qgrid = patch.points(ug.ravel(), vg.ravel())  # (G, 3)

    best = np.empty(n, dtype=float)
    bu = np.empty(n, dtype=float)
    bv = np.empty(n, dtype=float)
    # Coarse pass in chunks to bound memory.
    chunk = max(1, int(4e6 // qgrid.shape[0]))
    for i in range(0, n, chunk):
        d = geo.dist_arr(metric, pts[i:i + chunk, None, :], qgrid[None, :, :])
        j = np.argmin(d, axis=1)
        best[i:i + chunk] = d[np.arange(d.shape[0]), j]
        bu[i:i + chunk] = ug.ravel()[j]
        bv[i:i + chunk] = vg.ravel()[j]

    hu = (uu[1] - uu[0]) if gu > 1 else 0.0
    hv = (vv[1] - vv[0]) if gv > 1 else 0.0
    _refine_track(pts, metric, patch, best, bu, bv, hu, hv,
                  levels, local, shrink, chunk)
    for u0, v0 in (seeds or ()):
        su = np.clip(np.asarray(u0, dtype=float), patch.u_lo, patch.u_hi)
        sv = np.clip(np.asarray(v0, dtype=float), patch.v_lo, patch.v_hi)
        q0 = patch.points(su, sv)
        sbest = geo.dist_arr(metric, pts, q0)
        _refine_track(pts, metric, patch, sbest, su, sv, hu, hv,
                      levels, local, shrink, chunk)
        best = np.minimum(best, sbest)
    return best


# ---------------------------------------------------------------------------
# Cached distance-to-gauge-sphere profile.
#
# Rotations about the t axis are isometries fixing every centered gauge
# sphere, so the distance from an interior point to the unit sphere
# depends only on (|z|, t).  Interior points are parametrized as
# w = delta_{1-u^2} (sqrt(cos s), 0, sin s) with u in [0, 1], s in
# [-pi/2, pi/2].  The distance has square-root behaviour both in the
# gauge deficiency (near the sphere) and in s (near the characteristic
# poles), so the table is built over substituted coordinates
# gauge = 1 - u^2 and s = (pi/2) sign(w) (1 - (1-|w|)^2), which make the
# profile Lipschitz on the whole chart; a bilinear table then answers
# bulk queries at ~1e-3 relative accuracy.

_SPHERE_TABLE = {}


def _s_to_w(s: np.ndarray) -> np.ndarray:
    """Pole-clustering substitution: w in [-1,1] with s = (pi/2) sign(w)
    (1 - (1-|w|)^2)."""
    frac = np.clip(np.abs(s) / (0.5 * math.pi), 0.0, 1.0)
    return np.sign(s) * (1.0 - np.sqrt(1.0 - frac))


def _w_to_s(w: np.ndarray) -> np.ndarray:
    return 0.5 * math.pi * np.sign(w) * (1.0 - (1.0 - np.abs(w)) ** 2)


def _sphere_distance_table(metric: Metric):
    interp = _SPHERE_TABLE.get(metric)
    if interp is None:
        from scipy.interpolate import RegularGridInterpolator

        if metric is Metric.KORANYI:
            # High-resolution profile shipped with the package.
            from importlib import resources

            ref = resources.files("h1qclab").joinpath(
                "data/sphere_distance_table.npz")
            if ref.is_file():
                with ref.open("rb") as fh:
                    data = np.load(fh)
                    interp = RegularGridInterpolator(
                        (data["u"], data["w"]), data["value"], method="linear")
                _SPHERE_TABLE[metric] = interp
                return interp
        uu = np.linspace(0.0, 1.0, 257)
        ww = np.linspace(-1.0, 1.0, 257)
        ss = _w_to_s(ww)
        umesh, smesh = np.meshgrid(uu, ss, indexing="ij")
        gmesh = 1.0 - umesh * umesh
        rho = np.sqrt(np.maximum(np.cos(smesh), 0.0))
        pts = np.stack([gmesh * rho, np.zeros_like(gmesh),
                        gmesh * gmesh * np.sin(smesh)], axis=-1).reshape(-1, 3)
        val = _centered_sphere_dist(pts, np.zeros(3), 1.0, metric
                                    ).reshape(gmesh.shape)
        if metric is Metric.KORANYI:
            val = np.maximum(val, 1.0 - gmesh)
        val[0, :] = 0.0  # u = 0 is the sphere itself
        interp = RegularGridInterpolator((uu, ww), val, method="linear")
        _SPHERE_TABLE[metric] = interp
    return interp


def _collar_gauge_bound(collar_unit: float) -> float:
    """Gauge radius (relative to the sphere radius) enclosing the region
    {d(x, sphere) > collar_unit} of the unit ball: bilinear interpolation
    never exceeds the corner values, so the region lies past the last
    table column whose maximum is below the collar."""
    interp = _sphere_distance_table(Metric.KORANYI)
    uu = np.asarray(interp.grid[0])
    vmax = np.asarray(interp.values).max(axis=1)
    above = np.nonzero(vmax > collar_unit)[0]
    if above.size == 0:
        raise SamplingFailure(
            f"collar {collar_unit} exceeds the deepest boundary distance")
    return float(1.0 - uu[max(int(above[0]) - 1, 0)] ** 2)


def _sphere_distance_fast(w: np.ndarray, metric: Metric) -> np.ndarray:
    """Distance from points w (already centered and scaled to the unit
    sphere) to the unit gauge sphere; 0 for points on or outside it."""
    interp = _sphere_distance_table(metric)
    g = geo.gauge(w)
    g2 = np.maximum(g * g, 1e-300)
    u = np.sqrt(np.clip(1.0 - g, 0.0, 1.0))
    s = np.arcsin(np.clip(w[:, 2] / g2, -1.0, 1.0))
    return interp(np.stack([u, _s_to_w(s)], axis=-1))


# ---------------------------------------------------------------------------
# Domains.

@dataclass(frozen=True)
class Domain:
    boundary_tolerance: float = field(default=1e-6, kw_only=True)

    def contains(self, p: Point) -> bool:
        return bool(self.contains_arr(p.as_array()[None, :])[0])

    def contains_arr(self, pts) -> np.ndarray:
        raise NotImplementedError

    def boundary_distance(self, p: Point, metric: Metric) -> float:
        if not self.contains(p):
            raise InvalidArgumentError(f"point {p} is not in the domain")
        return float(self.boundary_distance_arr(p.as_array()[None, :], metric)[0])

    def boundary_distance_arr(self, pts, metric: Metric) -> np.ndarray:
        raise NotImplementedError

    def bounding_box(self):
        """Euclidean box ((x0,x1),(y0,y1),(t0,t1)) enclosing the domain."""
        raise NotImplementedError

    def _collar_ok_arr(self, pts, collar: float, metric: Metric) -> np.ndarray:
        """Cheap sufficient condition for boundary_distance > collar."""
        return self.boundary_distance_arr(pts, metric) > collar

    def fast_boundary_distance_arr(self, pts, metric: Metric) -> np.ndarray:
        """Boundary distance for bulk filtering.  Subclasses may answer from
        a cached interpolation table (relative accuracy ~1e-3) instead of the
        refining minimizer; the default delegates to the exact oracle."""
        return self.boundary_distance_arr(pts, metric)

    def sample_interior(self, n: int, seed: int, collar: float = 0.0,
                        metric: Metric = Metric.KORANYI) -> list:
        """n interior points with boundary_distance > collar, deterministic."""
        pts = self._sample_interior_raw(n, seed, collar, metric)
        return [Point.from_array(row) for row in pts]

    def _sample_interior_raw(self, n: int, seed: int, collar: float,
                             metric: Metric) -> np.ndarray:
        if n < 1:
            raise InvalidArgumentError(f"need n >= 1, got {n}")
        if collar < 0.0:
            raise InvalidArgumentError(f"collar must be >= 0, got {collar}")
        rng = stream(seed, f"sample-interior:{self.__class__.__name__}")
        (x0, x1), (y0, y1), (t0, t1) = self.bounding_box()
        accepted = []
        drawn = 0
        batch = min(max(4 * n, 1024), 2_000_000)
        while sum(len(a) for a in accepted) < n:
            lo = np.array([x0, y0, t0])
            hi = np.array([x1, y1, t1])
            cand = rng.uniform(lo, hi, size=(batch, 3))
            drawn += batch
            keep = self.contains_arr(cand)
            cand = cand[keep]
            if cand.shape[0]:
                if collar > 0.0:
                    cand = cand[self._collar_ok_arr(cand, collar, metric)]
                if cand.shape[0]:
                    accepted.append(cand)
            total = sum(a.shape[0] for a in accepted)
            if drawn >= max(int(2e6), 50 * n) and total / drawn < _ACCEPT_FLOOR:
                raise SamplingFailure(
                    f"interior sampling acceptance rate {total / drawn:.2e} "
                    f"below {_ACCEPT_FLOOR:.0e} after {drawn} draws")
        return np.concatenate(accepted, axis=0)[:n]

    def sample_interior_arr(self, n: int, seed: int, collar: float = 0.0,
                            metric: Metric = Metric.KORANYI) -> np.ndarray:
        return self._sample_interior_raw(n, seed, collar, metric)

    def sample_collar_arr(self, n: int, seed: int, collar: float,
                          metric: Metric = Metric.KORANYI) -> np.ndarray:
        """n points of the collar-restricted region {x : d(x, bdry) > collar},
        judged by the fast boundary-distance oracle; deterministic.  The
        default rejects interior samples with adaptive batch sizing;
        subclasses may propose from a tighter carrier."""
        if n < 1:
            raise InvalidArgumentError(f"need n >= 1, got {n}")
        if collar <= 0.0:
            raise InvalidArgumentError(f"collar must be positive, got {collar}")
        got, count, salt = [], 0, 0
        batch = min(max(4 * n, 1024), 2_000_000)
        drawn = 0
        while count < n and salt < 256:
            pts = self.sample_interior_arr(batch, seed + 7919 * salt,
                                           metric=metric)
            drawn += batch
            d = self.fast_boundary_distance_arr(pts, metric)
            sel = pts[d > collar]
            salt += 1
            if sel.shape[0]:
                got.append(sel)
                count += sel.shape[0]
                if count < n:
                    rate = count / drawn
                    batch = int(min(max(batch, 1.5 * (n - count) / rate),
                                    2_000_000))
            else:
                batch = min(4 * batch, 2_000_000)
        if count < n:
            raise SamplingFailure(
                f"collar-region sampling produced {count}/{n} points; the "
                f"collar {collar} may exceed the deepest boundary distance")
        return np.concatenate(got)[:n]


@dataclass(frozen=True)
class KoranyiBall(Domain):
    center: Point
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise InvalidArgumentError(f"radius must be positive, got {self.radius}")

    def contains_arr(self, pts):
        return geo.koranyi_dist_arr(np.asarray(pts, dtype=float),
                                    self.center.as_array()) < self.radius

    def boundary_distance_arr(self, pts, metric: Metric):
        pts = np.asarray(pts, dtype=float)
        c = self.center.as_array()
        val = _centered_sphere_dist(pts, c, self.radius, metric)
        if metric is Metric.KORANYI:
            # The infimum is at least radius - d(center, p) by the triangle
            # inequality, since every boundary point sits at distance radius
            # from the center.
            lower = self.radius - geo.koranyi_dist_arr(pts, self.center.as_array())
            val = np.maximum(val, lower)
        return val

    def fast_boundary_distance_arr(self, pts, metric: Metric):
        if metric is not Metric.KORANYI:
            return self.boundary_distance_arr(pts, metric)
        pts = np.asarray(pts, dtype=float)
        w = geo.dilate_arr(1.0 / self.radius,
                           geo.mul(geo.inv(self.center.as_array()), pts))
        return self.radius * _sphere_distance_fast(w, metric)

    def _collar_ok_arr(self, pts, collar, metric):
        if metric is Metric.KORANYI:
            g = geo.koranyi_dist_arr(np.asarray(pts, dtype=float),
                                     self.center.as_array())
            return self.radius - g > collar
        return super()._collar_ok_arr(pts, collar, metric)

    def sample_collar_arr(self, n: int, seed: int, collar: float,
                          metric: Metric = Metric.KORANYI) -> np.ndarray:
        """Collar-region sampling with a gauge-ball proposal: the distance
        profile bounds the gauge radius of {d > collar}, and gauge-polar
        coordinates sample that sub-ball uniformly without rejection."""
        if metric is not Metric.KORANYI or collar <= 0.0 or n < 1:
            return super().sample_collar_arr(n, seed, collar, metric)
        if collar >= self.radius:
            raise SamplingFailure(
                f"collar {collar} is at least the ball radius {self.radius}; "
                "the collar-restricted region is empty")
        gbound = _collar_gauge_bound(collar / self.radius)
        rng = stream(seed, "collar-sample:KoranyiBall")
        c = self.center.as_array()
        got, count, tries = [], 0, 0
        batch = min(max(4 * n, 1024), 2_000_000)
        while count < n and tries < 256:
            w = rng.uniform(-1.0, 1.0, size=(batch, 3))
            g = geo.gauge(w)
            w = w[(g > 1e-9) & (g < 1.0)]
            q = geo.dilate_arr(1.0 / geo.gauge(w), w)
            r = self.radius * gbound \
                * rng.uniform(0.0, 1.0, size=q.shape[0]) ** 0.25
            pts = geo.mul(c, geo.dilate_arr(r, q))
            d = self.fast_boundary_distance_arr(pts, metric)
            sel = pts[d > collar]
            tries += 1
            if sel.shape[0]:
                got.append(sel)
                count += sel.shape[0]
        if count < n:
            raise SamplingFailure(
                f"collar-region sampling produced {count}/{n} points for "
                f"collar {collar}")
        return np.concatenate(got)[:n]

    def bounding_box(self):
        c, r = self.center, self.radius
        # p = c . w with gauge(w) <= r, so |w_z| <= r, |w_t| <= r^2, and the
        # group product contributes a cross term 2|c_x w_y - c_y w_x|.
        ht = r * r + 2.0 * r * (abs(c.x) + abs(c.y))
        return ((c.x - r, c.x + r), (c.y - r, c.y + r),
                (c.t - ht, c.t + ht))


@dataclass(frozen=True)
class PuncturedSpace(Domain):
    puncture: Point = geo.ORIGIN
    window: float = 4.0  # half-width of the sampling box around the puncture

    def __post_init__(self):
        if not (self.window > 0.0 and math.isfinite(self.window)):
            raise InvalidArgumentError(f"window must be positive, got {self.window}")

    def contains_arr(self, pts):
        return geo.koranyi_dist_arr(np.asarray(pts, dtype=float),
                                    self.puncture.as_array()) > 0.0

    def boundary_distance_arr(self, pts, metric: Metric):
        return geo.dist_arr(metric, np.asarray(pts, dtype=float),
                            self.puncture.as_array())

    def bounding_box(self):
        c, w = self.puncture, self.window
        return ((c.x - w, c.x + w), (c.y - w, c.y + w),
                (c.t - w * w, c.t + w * w))


@dataclass(frozen=True)
class KoranyiAnnulus(Domain):
    center: Point
    r_in: float
    r_out: float

    def __post_init__(self):
        if not (0.0 < self.r_in < self.r_out and math.isfinite(self.r_out)):
            raise InvalidArgumentError(
                f"need 0 < r_in < r_out, got ({self.r_in}, {self.r_out})")

    def contains_arr(self, pts):
        g = geo.koranyi_dist_arr(np.asarray(pts, dtype=float),
                                 self.center.as_array())
        return (g > self.r_in) & (g < self.r_out)

    def boundary_distance_arr(self, pts, metric: Metric):
        pts = np.asarray(pts, dtype=float)
        c = self.center.as_array()
        inner = _centered_sphere_dist(pts, c, self.r_in, metric)
        outer = _centered_sphere_dist(pts, c, self.r_out, metric)
        val = np.minimum(inner, outer)
        if metric is Metric.KORANYI:
            g = geo.koranyi_dist_arr(pts, c)
            val = np.maximum(val, np.minimum(g - self.r_in, self.r_out - g))
        return val

    def _collar_ok_arr(self, pts, collar, metric):
        if metric is Metric.KORANYI:
            g = geo.koranyi_dist_arr(np.asarray(pts, dtype=float),
                                     self.center.as_array())
            return np.minimum(g - self.r_in, self.r_out - g) > collar
        return super()._collar_ok_arr(pts, collar, metric)

    def bounding_box(self):
        c, r = self.center, self.r_out
        ht = r * r + 2.0 * r * (abs(c.x) + abs(c.y))
        return ((c.x - r, c.x + r), (c.y - r, c.y + r),
                (c.t - ht, c.t + ht))


@dataclass(frozen=True)
class Box(Domain):
    x_bounds: tuple
    y_bounds: tuple
    t_bounds: tuple

    def __post_init__(self):
        for lo, hi in (self.x_bounds, self.y_bounds, self.t_bounds):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise InvalidArgumentError(f"bad box bounds ({lo}, {hi})")

    def contains_arr(self, pts):
        pts = np.asarray(pts, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for axis, (lo, hi) in enumerate((self.x_bounds, self.y_bounds, self.t_bounds)):
            ok &= (pts[..., axis] > lo) & (pts[..., axis] < hi)
        return ok

    def boundary_distance_arr(self, pts, metric: Metric):
        pts = np.asarray(pts, dtype=float)
        val = np.full(pts.shape[0], np.inf)
        for patch, (ua, va) in _box_face_patches(self.bounding_box()):
            val = np.minimum(val, _min_over_patch(
                pts, metric, patch, seeds=[(pts[:, ua], pts[:, va])]))
        return val

    def _plane_distance_arr(self, pts) -> np.ndarray:
        """Gauge distance to the nearest of the six bounding planes, in
        closed form.  The planes contain the faces, so this never exceeds
        the true boundary distance."""
        pts = np.asarray(pts, dtype=float)
        d = np.full(pts.shape[0], np.inf)
        for axis, (lo, hi) in ((0, self.x_bounds), (1, self.y_bounds)):
            # Offsets to a vertical plane leave the lateral and vertical
            # components free; the gauge is minimized with both zero.
            d = np.minimum(d, np.abs(pts[:, axis] - lo))
            d = np.minimum(d, np.abs(pts[:, axis] - hi))
        # Horizontal plane t = c: with |z| = r and lateral offset length
        # rho chosen to twist against the vertical gap, the fourth power
        # of the gauge is rho^4 + (|dt| - 2 r rho)^2, minimized at the
        # positive root of rho^3 + 2 r^2 rho = r |dt| (Cardano).
        r = np.hypot(pts[:, 0], pts[:, 1])
        for c in self.t_bounds:
            dt = np.abs(pts[:, 2] - c)
            aa = 2.0 * r * r / 3.0
            bb = 0.5 * r * dt
            disc = np.sqrt(bb * bb + aa ** 3)
            rho = np.cbrt(bb + disc) + np.cbrt(bb - disc)
            d = np.minimum(
                d, (rho ** 4 + np.maximum(dt - 2.0 * r * rho, 0.0) ** 2) ** 0.25)
        return d

    def _collar_ok_arr(self, pts, collar: float, metric: Metric):
        # Sufficient: every metric here dominates the gauge distance to
        # the bounding planes, which in turn bounds the face distance.
        return self._plane_distance_arr(pts) > collar

    def bounding_box(self):
        return (tuple(self.x_bounds), tuple(self.y_bounds), tuple(self.t_bounds))


def domain_from_config(cfg: dict) -> Domain:
    """Build a domain from its JSON description {"kind": ..., params...}."""
    kind = cfg.get("kind")
    if kind == "koranyi-ball":
        return KoranyiBall(Point(*cfg.get("center", (0, 0, 0))), float(cfg["radius"]))
    if kind == "punctured-space":
        return PuncturedSpace(Point(*cfg.get("puncture", (0, 0, 0))),
                              float(cfg.get("window", 4.0)))
    if kind == "koranyi-annulus":
        return KoranyiAnnulus(Point(*cfg.get("center", (0, 0, 0))),
                              float(cfg["r_in"]), float(cfg["r_out"]))
    if kind == "box":
        return Box(tuple(cfg["x"]), tuple(cfg["y"]), tuple(cfg["t"]))
    raise InvalidArgumentError(f"unknown domain kind {kind!r}")

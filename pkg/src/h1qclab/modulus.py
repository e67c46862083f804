"""Numerical 4-modulus of ring curve families.

Upper bound: the explicit admissible density rho(x) = 1/(gauge(x) log k)
on the ring r < gauge < kr (admissible because the gauge is 1-Lipschitz
along curves), whose energy integral has the closed form
2 pi^2 (log k)^{-3}; it is estimated by importance-sampled Monte Carlo
(log-uniform in the gauge radius, cone-uniform in direction), which is
unbiased for general integrands and exact up to rounding for this one.

Lower bound: discretize densities on a rectilinear grid over the ring,
impose the admissibility constraint on finitely many sampled curves via
midpoint quadrature, and maximize the smooth Lagrangian dual of the
resulting convex program.  Weak duality makes every reported value a true lower
bound of the discretized optimum; sampling fewer curves than the full
family only lowers it further, so the ordering lower <= mod_4 <= upper
holds up to the quadrature slack, which is reported.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import brentq

from . import geometry as geo
from .domains import KoranyiAnnulus
from .errors import ConfigurationError, InvalidArgumentError
from .geometry import Curve, Metric, Point
from .streams import stream

TWO_PI_SQ = 2.0 * math.pi ** 2

_RAY_EVERY = 8   # one straight dilation ray per this many curves
_TWIST = 0.15    # twist strength of the randomized horizontal crossings


@dataclass(frozen=True)
class RingSpec:
    center: Point
    r: float
    k: float

    def __post_init__(self):
        if not (self.r > 0.0 and math.isfinite(self.r)):
            raise InvalidArgumentError(f"need r > 0, got {self.r}")
        if not (self.k > 1.0 and math.isfinite(self.k)):
            raise InvalidArgumentError(f"need k > 1, got {self.k}")

    def carrier(self) -> KoranyiAnnulus:
        return KoranyiAnnulus(self.center, self.r, self.k * self.r)


@dataclass(frozen=True)
class CurveFamily:
    curves: list
    p_exp: float
    carrier: object


@dataclass(frozen=True)
class ModulusBounds:
    upper: float
    lower: float
    grid_resolution: int
    curves_sampled: int
    slack: float


def _cone_uniform_directions(rng, n: int) -> np.ndarray:
    """Unit-gauge directions distributed by the cone measure (the image of
    the uniform volume measure under radial gauge projection)."""
    out = []
    got = 0
    while got < n:
        w = rng.uniform([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0], size=(4 * n, 3))
        g = geo.gauge(w)
        w = w[(g < 1.0) & (g > 1e-6)]
        if w.shape[0]:
            out.append(geo.dilate_arr(1.0 / geo.gauge(w), w))
            got += w.shape[0]
    return np.concatenate(out)[:n]


def ring_curve_family(spec: RingSpec, n_curves: int, pts_per_curve: int,
                      seed: int) -> CurveFamily:
    """Polyline curves crossing the ring between its two gauge spheres.

    One curve in eight is a straight dilation ray through a cone-uniform
    gauge-sphere direction.  The rest are randomized horizontal
    crossings: planar spirals x = rho cos(alpha0 + omega (rho - rho0)),
    y = rho sin(...) lifted horizontally, so t' = 2(y x' - x y')
    = -2 rho^2 omega integrates in closed form to
    t(rho) = t0 - (2/3) omega (rho^3 - rho0^3).  Horizontality makes the
    metric length comparable to the planar arc length, and the twist
    sign is chosen to push t away from 0, which keeps gauge^4 =
    rho^4 + t^2 strictly increasing: every curve sweeps the gauge range
    exactly [r, kr], with azimuths stratified to spread the family
    evenly around the ring.
    """
    if n_curves < 1 or pts_per_curve < 2:
        raise InvalidArgumentError("need n_curves >= 1 and pts_per_curve >= 2")
    rng = stream(seed, "ring-curves")
    c = spec.center.as_array()
    r, k = spec.r, spec.k
    levels = r * k ** np.linspace(0.0, 1.0, pts_per_curve)
    q0 = _cone_uniform_directions(rng, n_curves)
    n_cross = n_curves - len(range(0, n_curves, _RAY_EVERY))
    crossing_index = 0
    curves = []
    for i in range(n_curves):
        if i % _RAY_EVERY == 0:
            dirs = np.broadcast_to(q0[i], (pts_per_curve, 3)).copy()
            verts = geo.mul(c, geo.dilate_arr(levels, dirs))
        else:
            lat = math.asin(max(-1.0, min(1.0, q0[i, 2])))
            alpha0 = 2.0 * math.pi * (crossing_index + rng.uniform()) / n_cross
            crossing_index += 1
            rho0 = r * math.sqrt(math.cos(lat))
            t0 = r * r * math.sin(lat)
            if t0 != 0.0:
                sgn = -math.copysign(1.0, t0)
            else:
                sgn = 1.0 if rng.uniform() < 0.5 else -1.0
            # The r factor keeps the twist angle dilation-equivariant:
            # alpha depends on rho/r only, so scaling r rescales the
            # whole family by the corresponding group dilation.
            om = sgn * _TWIST * rng.uniform(0.2, 1.0) * r / max(rho0, 0.1 * r) ** 2

            def t_of(rho, t0=t0, om=om, rho0=rho0):
                return t0 - (2.0 / 3.0) * om * (rho ** 3 - rho0 ** 3)

            rho_end = brentq(
                lambda rho: rho ** 4 + t_of(rho) ** 2 - (k * r) ** 4,
                rho0, k * r, xtol=1e-14)
            rs = np.linspace(rho0, rho_end, pts_per_curve)
            al = alpha0 + om * (rs - rho0)
            pts = np.stack([rs * np.cos(al), rs * np.sin(al), t_of(rs)],
                           axis=-1)
            verts = geo.mul(c, pts)
        curves.append(Curve.from_array(verts))
    return CurveFamily(curves, 4.0, spec.carrier())


def modulus_upper_explicit(spec: RingSpec, mc_n: int, seed: int) -> float:
    """Monte-Carlo energy of the explicit density; an upper bound of mod_4."""
    if mc_n < 2:
        raise InvalidArgumentError(f"need mc_n >= 2, got {mc_n}")
    rng = stream(seed, "modulus-upper")
    logk = math.log(spec.k)
    q = _cone_uniform_directions(rng, mc_n)
    u = rng.uniform(0.0, 1.0, size=mc_n)
    rho = spec.r * spec.k ** u  # log-uniform radius, density 1/(rho log k)
    pts = geo.mul(spec.center.as_array(), geo.dilate_arr(rho, q))
    g = geo.koranyi_dist_arr(pts, spec.center.as_array())
    density4 = (g * logk) ** -4.0
    # Volume element in gauge-polar form: dm = 2 pi^2 rho^3 drho x dsigma(q).
    weights = density4 * TWO_PI_SQ * rho ** 4 * logk
    return float(np.mean(weights))


def ring_modulus_reference(k: float, omega4: float) -> float:
    """omega4 (log k)^{-3}."""
    if k <= 1.0:
        raise InvalidArgumentError(f"need k > 1, got {k}")
    if omega4 <= 0.0:
        raise InvalidArgumentError(f"need omega4 > 0, got {omega4}")
    return omega4 * math.log(k) ** -3.0


def _assemble_constraints(fam: CurveFamily, grid: int):
    carrier = fam.carrier
    (x0, x1), (y0, y1), (t0, t1) = carrier.bounding_box()
    nx = ny = nt = int(grid)
    hx, hy, ht = (x1 - x0) / nx, (y1 - y0) / ny, (t1 - t0) / nt
    cell_vol = hx * hy * ht

    # Carrier cells by center membership.
    cx = x0 + hx * (np.arange(nx) + 0.5)
    cy = y0 + hy * (np.arange(ny) + 0.5)
    ct = t0 + ht * (np.arange(nt) + 0.5)
    gx, gy, gt = np.meshgrid(cx, cy, ct, indexing="ij")
    cell_centers = np.stack([gx.ravel(), gy.ravel(), gt.ravel()], axis=-1)
    inside = carrier.contains_arr(cell_centers)
    cell_map = np.full(nx * ny * nt, -1, dtype=np.int64)
    cell_map[inside] = np.arange(int(inside.sum()))
    n_cells = int(inside.sum())
    if n_cells == 0:
        raise ConfigurationError("no grid cell centers fall inside the carrier")

    rows, cols, vals = [], [], []
    dropped = np.zeros(len(fam.curves))
    for ci, curve in enumerate(fam.curves):
        arr = curve.as_array()
        mids = 0.5 * (arr[1:] + arr[:-1])
        seg = geo.koranyi_dist_arr(arr[1:], arr[:-1])
        ix = np.floor((mids[:, 0] - x0) / hx).astype(np.int64)
        iy = np.floor((mids[:, 1] - y0) / hy).astype(np.int64)
        it = np.floor((mids[:, 2] - t0) / ht).astype(np.int64)
        ok = ((ix >= 0) & (ix < nx) & (iy >= 0) & (iy < ny)
              & (it >= 0) & (it < nt))
        flat = np.where(ok, (ix * ny + iy) * nt + it, 0)
        col = np.where(ok, cell_map[flat], -1)
        ok &= col >= 0
        dropped[ci] = float(np.sum(seg[~ok]))
        rows.append(np.full(int(ok.sum()), ci))
        cols.append(col[ok])
        vals.append(seg[ok])
    mat = sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(fam.curves), n_cells))
    row_sums = np.asarray(mat.sum(axis=1)).ravel()
    if np.any(row_sums <= 0.0):
        raise ConfigurationError(
            "a sampled curve contributes no in-carrier quadrature length; "
            "refine the grid")
    return mat, cell_vol, float(np.max(dropped))


def modulus_lower_sampled(fam: CurveFamily, grid: int, iterations: int) -> float:
    """Bound-constrained quasi-Newton ascent of the Lagrangian dual of
    the discretized modulus program; any feasible dual value is a lower
    bound by weak duality."""
    if grid < 8:
        raise InvalidArgumentError(f"need grid >= 8 cells per axis, got {grid}")
    if iterations < 1:
        raise InvalidArgumentError(f"need iterations >= 1, got {iterations}")
    from scipy.optimize import minimize

    mat, cell_vol, _ = _assemble_constraints(fam, grid)
    mat_t = mat.T.tocsr()
    m = mat.shape[0]

    def neg_dual(mu):
        # rho* minimizes sum v rho^4 - mu^T A rho at 4 v rho^3 = A^T mu,
        # which collapses the Lagrangian to mu^T 1 - 3 v sum rho*^4.
        pull = mat_t @ mu
        rho = (pull / (4.0 * cell_vol)) ** (1.0 / 3.0)
        val = float(mu.sum()) - 3.0 * cell_vol * float(np.sum(rho ** 4))
        grad = 1.0 - mat @ rho
        return -val, -grad

    # Start at each curve's isolated optimum mu_i = 4 v / S_i^3 with
    # S_i = sum_j s_ij^(4/3), which is exact when curves share no cells.
    s_pow = np.asarray(mat.power(4.0 / 3.0).sum(axis=1)).ravel()
    mu0 = 4.0 * cell_vol / np.maximum(s_pow, 1e-300) ** 3
    res = minimize(neg_dual, mu0, jac=True, method="L-BFGS-B",
                   bounds=[(0.0, None)] * m,
                   options={"maxiter": iterations, "ftol": 1e-14,
                            "gtol": 1e-12})
    # Weak duality: any feasible dual point lower-bounds the discrete
    # program, so take the better of the start and the final iterate.
    return max(0.0, -float(res.fun), -neg_dual(mu0)[0])


def ring_modulus_bounds(spec: RingSpec, n_curves: int, pts_per_curve: int,
                        grid: int, iterations: int, mc_n: int,
                        seed: int) -> ModulusBounds:
    fam = ring_curve_family(spec, n_curves, pts_per_curve, seed)
    upper = modulus_upper_explicit(spec, mc_n, seed)
    mat_slack = _assemble_constraints(fam, grid)[2]
    lower = modulus_lower_sampled(fam, grid, iterations)
    return ModulusBounds(upper, lower, grid, n_curves, mat_slack)

"""End-to-end experiment drivers.

Each driver samples a configuration, computes the quantities appearing
in one inequality (Koebe ratio, quasisymmetry envelope, distance
estimate, curve diameter, integral comparability, Harnack ratio,
Ahlfors regularity), and reports per-sample records plus the empirical
constant.  Non-constructive constants are reported, not asserted; the
test suite pins them against recorded baselines.
"""

from __future__ import annotations

import math

import numpy as np

from . import geometry as geo
from .covering import WhitneyDecomposition, membership_counts
from .errors import ConfigurationError, InvalidArgumentError
from .geometry import Ball, Curve, Metric, Point
from .integration import (ScalarField, average_derivative, log_jacobian_field,
                          sample_ball_arr)
from .maps import (SmoothMap, horizontal_matrix, op_norm_2x2,
                   radial_stretch_axis)
from .streams import stream


def _af_at(f, dom, pts, metric, shrink, mc_n, seed):
    """a_f at several points; one ball average of log J_f per point.

    The gauge-metric path draws all ball samples in one vectorized pass
    (unit-ball offsets dilated per point); other metrics fall back to the
    per-point estimator.
    """
    pts = np.asarray(pts, dtype=float)
    if metric is not Metric.KORANYI:
        out = np.empty(len(pts))
        for i, row in enumerate(pts):
            out[i] = average_derivative(f, dom, Point.from_array(row), metric,
                                        shrink, mc_n, seed + 31 * i)
        return out
    r = dom.fast_boundary_distance_arr(pts, metric) / shrink
    if np.any(r <= 0.0):
        raise InvalidArgumentError(
            "average-derivative ball of nonpositive radius; points must be "
            "interior")
    field = log_jacobian_field(f)
    rng = stream(seed, "af-bulk")
    n = pts.shape[0]
    out = np.empty(n)
    chunk = max(1, 2_000_000 // max(mc_n, 1))
    for s in range(0, n, chunk):
        e = min(s + chunk, n)
        w = rng.uniform(-1.0, 1.0, size=(e - s, mc_n, 3))
        bad = geo.gauge(w) >= 1.0
        while np.any(bad):
            w[bad] = rng.uniform(-1.0, 1.0, size=(int(bad.sum()), 3))
            bad = geo.gauge(w) >= 1.0
        rr = r[s:e, None]
        w[..., 0] *= rr
        w[..., 1] *= rr
        w[..., 2] *= rr * rr
        vals = field(geo.mul(pts[s:e, None, :], w).reshape(-1, 3))
        out[s:e] = np.exp(0.25 * vals.reshape(e - s, mc_n).mean(axis=1))
    return out


# ---------------------------------------------------------------------------
# Koebe scan.

def koebe_scan(f: SmoothMap, dom, dom_image, metric: Metric, points: int,
               mc_n: int, seed: int, shrink: float = 1.0) -> dict:
    """Compare a_f with the boundary-distance ratio at sampled points."""
    if points < 1:
        raise InvalidArgumentError(f"need points >= 1, got {points}")
    pts = dom.sample_interior_arr(points, seed, metric=metric)
    pts = pts[f.valid_arr(pts)]
    if pts.shape[0] == 0:
        raise ConfigurationError("no sampled point lies in the map's domain")
    images = f.apply_arr(pts)
    if not bool(np.all(dom_image.contains_arr(images))):
        raise ConfigurationError(
            "image domain mismatch: f maps a sample outside dom_image")
    d_in = dom.boundary_distance_arr(pts, metric)
    d_out = dom_image.boundary_distance_arr(images, metric)
    af = _af_at(f, dom, pts, metric, shrink, mc_n, seed)
    ratio = d_out / d_in
    log_disc = np.abs(np.log(af) - np.log(ratio))
    records = [{"x": list(map(float, p)), "a_f": float(a),
                "boundary_ratio": float(r), "log_discrepancy": float(ld)}
               for p, a, r, ld in zip(pts, af, ratio, log_disc)]
    return {"records": records, "c_hat": float(np.exp(np.max(log_disc)))}


# ---------------------------------------------------------------------------
# Ball-image geometry.

def ball_image_geometry(f: SmoothMap, ball: Ball, dom_image,
                        boundary_samples: int, seed: int) -> dict:
    if boundary_samples < 2:
        raise InvalidArgumentError("need boundary_samples >= 2")
    rng = stream(seed, "ball-image")
    # Points on and inside the ball (gauge-sphere directions for boundary).
    c = ball.center.as_array()
    w = rng.uniform([-1, -1, -1], [1, 1, 1], size=(8 * boundary_samples, 3))
    g = geo.gauge(w)
    w = w[(g > 1e-6) & (g < 1.0)][:boundary_samples]
    sphere = geo.mul(c, geo.dilate_arr(ball.radius / geo.gauge(w), w))
    interior = sample_ball_arr(ball, boundary_samples, seed, tag="ball-image")
    pts = np.concatenate([sphere, interior])
    imgs = f.apply_arr(pts)
    diam = 0.0
    for i in range(0, imgs.shape[0], 256):
        d = geo.koranyi_dist_arr(imgs[i:i + 256, None, :], imgs[None, :, :])
        diam = max(diam, float(np.max(d)))
    d_bdry = dom_image.boundary_distance_arr(imgs, Metric.KORANYI)
    center_img = f.apply_arr(c[None, :])
    center_d = float(dom_image.boundary_distance_arr(center_img,
                                                     Metric.KORANYI)[0])
    return {"diam_image": diam,
            "dist_image_to_boundary": float(np.min(d_bdry)),
            "center_image_boundary_distance": center_d,
            "diam_to_center_distance_ratio": diam / center_d}


# ---------------------------------------------------------------------------
# Quasisymmetry profile.

def qs_profile(f: SmoothMap, dom, x: Point, shrink: float, triples: int,
               seed: int, metric: Metric = Metric.KORANYI, bins: int = 12) -> dict:
    """Ratio-distortion profile on the egg-yolk ball B(x, d(x, bdry)/shrink)."""
    if shrink <= 1.0:
        raise InvalidArgumentError(f"shrink must be > 1, got {shrink}")
    if triples < 1:
        raise InvalidArgumentError(f"need triples >= 1, got {triples}")
    d = dom.boundary_distance(x, metric)
    yolk = Ball(x, d / shrink, metric)
    pts = sample_ball_arr(yolk, 3 * triples, seed, tag="qs")
    p1, p2, p3 = pts[:triples], pts[triples:2 * triples], pts[2 * triples:]
    d12 = geo.dist_arr(metric, p2, p1)
    d13 = geo.dist_arr(metric, p3, p1)
    ok = (d12 > 0.0) & (d13 > 0.0)
    p1, p2, p3 = p1[ok], p2[ok], p3[ok]
    t = (d12 / d13)[ok]
    f1, f2, f3 = f.apply_arr(p1), f.apply_arr(p2), f.apply_arr(p3)
    img = geo.dist_arr(metric, f2, f1) / geo.dist_arr(metric, f3, f1)

    logt = np.log(t)
    edges = np.linspace(logt.min(), logt.max() + 1e-12, bins + 1)
    which = np.clip(np.digitize(logt, edges) - 1, 0, bins - 1)
    envelope = []
    for b in range(bins):
        m = which == b
        if np.any(m):
            envelope.append({"t_bin_center": float(np.exp(0.5 * (edges[b] + edges[b + 1]))),
                             "eta_max": float(np.max(img[m])),
                             "count": int(m.sum())})
    smallest = which == 0
    h_hat = float(np.max(img[smallest] / t[smallest])) if np.any(smallest) else float("nan")
    return {"egg_yolk_shrink": shrink,
            "samples": [{"t": float(a), "ratio": float(b)} for a, b in zip(t, img)],
            "eta_envelope": envelope, "H_f_hat": h_hat}


# ---------------------------------------------------------------------------
# Distance estimate.

def distance_estimate_audit(f: SmoothMap, dom, a_exp: float, lambda_knob: float,
                            pairs: int, mc_n: int, seed: int,
                            metric: Metric = Metric.KORANYI) -> dict:
    if not (0.0 < a_exp < 1.0):
        raise InvalidArgumentError(f"need a_exp in (0,1), got {a_exp}")
    if lambda_knob < 1.0:
        raise InvalidArgumentError(f"need lambda_knob >= 1, got {lambda_knob}")
    if pairs < 1:
        raise InvalidArgumentError(f"need pairs >= 1, got {pairs}")
    z1 = dom.sample_interior_arr(pairs, seed, metric=metric)
    z1 = z1[f.valid_arr(z1)]
    if z1.shape[0] == 0:
        raise ConfigurationError("no admissible first endpoint sampled")
    d1 = dom.boundary_distance_arr(z1, metric)
    consts = []
    records = []
    for i, (p, dp) in enumerate(zip(z1, d1)):
        ball = Ball(Point.from_array(p), dp / (2.0 * lambda_knob), metric)
        z2 = sample_ball_arr(ball, 1, seed + 101 * i, tag="dist-est")[0]
        d12 = float(geo.dist_arr(metric, z2, p))
        if d12 == 0.0:
            continue
        af = _af_at(f, dom, p[None, :], metric, 1.0, mc_n, seed + 7 * i)[0]
        lhs = float(geo.dist_arr(metric, f.apply_arr(z2[None, :])[0],
                                 f.apply_arr(p[None, :])[0]))
        c_pair = lhs / (af * dp ** a_exp * d12 ** (1.0 - a_exp))
        consts.append(c_pair)
        records.append({"z1": list(map(float, p)), "d12": d12,
                        "c_pair": float(c_pair)})
    if not consts:
        raise ConfigurationError("pair constraint unsatisfiable for this domain")
    consts = np.array(consts)
    return {"records": records, "max_c": float(np.max(consts)),
            "median_c": float(np.median(consts)),
            "quantiles": {q: float(np.quantile(consts, q))
                          for q in (0.5, 0.9, 0.99)}}


# ---------------------------------------------------------------------------
# Curve diameter.

def curve_diameter_audit(f: SmoothMap, dom, curves, alpha: float, mc_n: int,
                         seed: int, metric: Metric = Metric.KORANYI,
                         shrink: float = 1.0) -> list:
    if not (0.0 < alpha <= 1.0):
        raise InvalidArgumentError(f"need alpha in (0,1], got {alpha}")
    reports = []
    for ci, curve in enumerate(curves):
        arr = curve.as_array()
        seg = geo.koranyi_dist_arr(arr[1:], arr[:-1])
        length = float(np.sum(seg))
        d_curve = float(np.min(dom.boundary_distance_arr(arr, metric)))
        admissible = length >= alpha * d_curve
        mids = 0.5 * (arr[1:] + arr[:-1])
        af = _af_at(f, dom, mids, metric, shrink, mc_n, seed + 997 * ci)
        weighted = float(np.sum(af * seg))
        imgs = f.apply_arr(arr)
        diam = float(np.max(geo.koranyi_dist_arr(imgs[:, None, :],
                                                 imgs[None, :, :])))
        reports.append({"curve": ci, "admissible": bool(admissible),
                        "length": length, "boundary_distance": d_curve,
                        "diam_image": diam, "weighted_length": weighted,
                        "ratio": diam / weighted if weighted > 0 else float("inf")})
    return reports


def sharpness_probe(k_exp: float, r: float) -> dict:
    """Axis restriction of the gauge-power stretch: a segment of length r
    from the origin maps to one of length r^k, so the diameter-to-length
    ratio r^{k-1} blows up as r -> 0 when k < 1."""
    if not (0.0 < k_exp < 1.0 or k_exp == 1.0):
        raise InvalidArgumentError(f"need k_exp in (0,1], got {k_exp}")
    if not (0.0 < r < 1.0):
        raise InvalidArgumentError(f"need r in (0,1), got {r}")
    diam = float(radial_stretch_axis(k_exp, r))
    return {"diam_image": diam, "length": r, "ratio": diam / r}


# ---------------------------------------------------------------------------
# Integral comparability and Harnack, over a Whitney decomposition.

def _whitney_quadrature(field_fn, w: WhitneyDecomposition, dom,
                        samples_per_ball: int, seed: int):
    """Integral of field over the union of Whitney balls.

    Per-ball uniform samples are weighted by vol(ball)/(n * multiplicity),
    where the multiplicity is the sample's membership count among all
    decomposition balls; overlaps therefore contribute exactly once.
    """
    total = 0.0
    all_pts = []
    all_w = []
    for i in range(w.centers.shape[0]):
        ball = Ball(Point.from_array(w.centers[i]), float(w.radii[i]), w.metric)
        pts = sample_ball_arr(ball, samples_per_ball, seed + 13 * i, tag="wq")
        vol = geo.ball_volume(ball)
        all_pts.append(pts)
        all_w.append(np.full(pts.shape[0], vol / pts.shape[0]))
    pts = np.concatenate(all_pts)
    base_w = np.concatenate(all_w)
    mult = membership_counts(pts, w.centers, w.radii, w.metric)
    mult = np.maximum(mult, 1)
    vals = field_fn(pts)
    total = float(np.sum(vals * base_w / mult))
    return total, pts, base_w / mult


def integral_comparability(f: SmoothMap, dom, q_list, w: WhitneyDecomposition,
                           mc_n: int, seed: int, samples_per_ball: int = 24,
                           af_mc_n: int = 256, shrink: float = 1.0) -> list:
    """Compare the integrals of |D_Hf|^q and a_f^q over the Whitney union."""
    for q in q_list:
        if q == 0:
            raise InvalidArgumentError("q = 0 is excluded")
    # One shared sample cloud; both integrands evaluated on it.
    def opnorm_field(pts):
        return op_norm_2x2(horizontal_matrix(f, pts))

    _, pts, weights = _whitney_quadrature(opnorm_field, w, dom,
                                          samples_per_ball, seed)
    opnorm = opnorm_field(pts)
    af = _af_at(f, dom, pts, w.metric, shrink, af_mc_n, seed + 1)
    out = []
    for q in q_list:
        int_op = float(np.sum(opnorm ** q * weights))
        int_af = float(np.sum(af ** q * weights))
        out.append({"q": float(q), "int_opnorm": int_op, "int_af": int_af,
                    "ratio": int_op / int_af if int_af else float("inf")})
    return out


def harnack_audit(f: SmoothMap, dom, w: WhitneyDecomposition,
                  pairs_per_ball: int, mc_n: int, seed: int,
                  shrink: float = 1.0, max_balls: int = 64) -> dict:
    """Max of a_f(x)/a_f(y) over point pairs inside single Whitney balls."""
    if pairs_per_ball < 1:
        raise InvalidArgumentError("need pairs_per_ball >= 1")
    n_balls = w.centers.shape[0]
    take = np.linspace(0, n_balls - 1, min(max_balls, n_balls)).astype(int)
    worst = 1.0
    per_ball = []
    for i in take:
        ball = Ball(Point.from_array(w.centers[i]), float(w.radii[i]), w.metric)
        pts = sample_ball_arr(ball, 2 * pairs_per_ball, seed + 17 * i,
                              tag="harnack")
        af = _af_at(f, dom, pts, w.metric, shrink, mc_n, seed + 19 * i)
        ratio = float(np.max(af) / np.min(af))
        per_ball.append({"ball": int(i), "ratio": ratio})
        worst = max(worst, ratio)
    return {"max_ball_ratio": worst, "per_ball": per_ball}

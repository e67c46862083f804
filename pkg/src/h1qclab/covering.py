"""Greedy covering selection and the constructive Whitney decomposition.

Balls whose diameters are comparable to their boundary distance are
produced layer by layer: candidate centers are sampled in each dyadic
layer 2^{k-1} <= d(x, bdry) <= 2^k, given candidate radius
(1/5) ((c1+c2)/2) d(x, bdry) with c1 = lambda/8 and c2 = lambda/(lambda+2),
thinned to a maximal disjoint subfamily by the greedy 5r argument, and
emitted with five times the candidate radius.  The emitted radii equal
((c1+c2)/2) d(center, bdry), so c1 d <= radius <= c2 d holds exactly.

Neighbor queries (greedy conflicts, probe membership) use a vectorized
group-adapted cell hash: the xy-plane is cut into s-squares, and within
the column over the square with corner (ms, ns) points are bucketed by
the vertical coordinate of their left translate by (ms, ns, 0)^{-1},
namely t + 2s(my - nx).  For any pair at Korányi distance <= s that
vertical coordinate, measured in either point's column, differs by at
most 9 s^2, so buckets of height 10 s^2 joined over the 3x3x3 adjacent
cells over-approximate every near pair.  Cell volume is O(s^4), matching
the volume of a Korányi s-ball, so occupancy stays proportional to the
local point density.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo
from .errors import InvalidArgumentError
from .geometry import Ball, Metric, Point
from .streams import stream

_DISJOINT_SLACK = 1e-12


# ---------------------------------------------------------------------------
# Cell-hash near-pair enumeration.

def _mix_keys(m, n, l):
    u = m.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    u += n.astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
    u += l.astype(np.uint64) * np.uint64(0x165667B19E3779F9)
    return u


def _column_keys(pts, s, dx, dy):
    """Cell (m, n, l) of each point in the xy-column shifted by (dx, dy):
    m, n index the s-square under the point; l buckets the vertical
    coordinate of the point's left translate by (ms, ns, 0)^{-1}."""
    m = np.floor(pts[:, 0] / s).astype(np.int64) + dx
    n = np.floor(pts[:, 1] / s).astype(np.int64) + dy
    wt = pts[:, 2] + 2.0 * s * (m * pts[:, 1] - n * pts[:, 0])
    l = np.floor(wt / (10.0 * s * s)).astype(np.int64)
    return m, n, l


def _near_pair_blocks(a_pts: np.ndarray, b_pts: np.ndarray, s: float,
                      pair_budget: int = 2_000_000):
    """Yield candidate index blocks (ia into a, ib into b) jointly covering
    every pair at Korányi distance <= s.  Over-approximate; callers
    re-check.  Blocks of a-points are sized from the observed mean cell
    occupancy so each yielded block stays near the pair budget."""
    a_pts = np.asarray(a_pts, dtype=float)
    b_pts = np.asarray(b_pts, dtype=float)
    if a_pts.shape[0] == 0 or b_pts.shape[0] == 0 or s <= 0.0:
        return
    bkeys = _mix_keys(*_column_keys(b_pts, s, 0, 0))
    order = np.argsort(bkeys, kind="stable")
    sorted_keys = bkeys[order]
    occupancy = b_pts.shape[0] / max(1, np.unique(sorted_keys).size)
    block = max(256, int(pair_budget / max(occupancy, 1.0)))

    for start in range(0, a_pts.shape[0], block):
        stop = min(start + block, a_pts.shape[0])
        apts = a_pts[start:stop]
        arange_a = np.arange(start, stop)
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                m, n, l = _column_keys(apts, s, dx, dy)
                for dl in (-1, 0, 1):
                    tk = _mix_keys(m, n, l + dl)
                    lo = np.searchsorted(sorted_keys, tk, "left")
                    hi = np.searchsorted(sorted_keys, tk, "right")
                    cnt = hi - lo
                    tot = int(cnt.sum())
                    if tot == 0:
                        continue
                    ia = np.repeat(arange_a, cnt)
                    pos = np.arange(tot) - np.repeat(np.cumsum(cnt) - cnt, cnt) \
                        + np.repeat(lo, cnt)
                    yield ia, order[pos]


def near_pairs(a_pts: np.ndarray, b_pts: np.ndarray, s: float):
    """Candidate index pairs (i into a, j into b) containing every pair
    with Korányi distance <= s.  Over-approximate; callers re-check."""
    out_a, out_b = [], []
    for ia, ib in _near_pair_blocks(a_pts, b_pts, s):
        out_a.append(ia)
        out_b.append(ib)
    if not out_a:
        return (np.empty(0, dtype=np.int64),) * 2
    return np.concatenate(out_a), np.concatenate(out_b)


def membership_counts(pts: np.ndarray, centers: np.ndarray, radii: np.ndarray,
                      metric: Metric) -> np.ndarray:
    """Number of balls containing each point."""
    pts = np.asarray(pts, dtype=float)
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    counts = np.zeros(pts.shape[0], dtype=np.int64)
    if centers.shape[0] == 0:
        return counts
    s = float(np.max(radii))
    # A point inside a ball is within Korányi distance <= radius <= s of
    # its center regardless of the ball metric (gauge <= sub-Riemannian).
    for ia, ib in _near_pair_blocks(pts, centers, s):
        d = geo.dist_arr(metric, pts[ia], centers[ib])
        inside = d < radii[ib]
        np.add.at(counts, ia[inside], 1)
    return counts


# ---------------------------------------------------------------------------
# Greedy disjoint subcover.

def _greedy_on_arrays(centers: np.ndarray, radii: np.ndarray, metric: Metric,
                      factor: float):
    """Incremental greedy sweep in priority order (radius descending, ties
    by lexicographic center): a ball is taken unless it conflicts with an
    already selected one; its dominator is the highest-priority selected
    conflict.  Only selected balls enter the cell hash, so each candidate
    costs 27 bucket lookups plus a small distance check."""
    n = centers.shape[0]
    order = np.lexsort((centers[:, 2], centers[:, 1], centers[:, 0], -radii))
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    s = 2.0 * float(np.max(radii))
    qkeys = np.empty((27, n), dtype=np.uint64)
    k = 0
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            m, col_n, l = _column_keys(centers, s, dx, dy)
            for dl in (-1, 0, 1):
                qkeys[k] = _mix_keys(m, col_n, l + dl)
                k += 1
    home = _mix_keys(*_column_keys(centers, s, 0, 0))

    buckets: dict = {}
    selected = np.zeros(n, dtype=bool)
    dominator = np.full(n, -1, dtype=np.int64)
    for idx in order:
        nearby = []
        for key in qkeys[:, idx]:
            hit = buckets.get(int(key))
            if hit:
                nearby.extend(hit)
        if nearby:
            d = geo.dist_arr(metric,
                             np.broadcast_to(centers[idx], (len(nearby), 3)),
                             centers[nearby])
            conflict = d <= radii[idx] + radii[nearby] + _DISJOINT_SLACK
            if conflict.any():
                hits = [nearby[i] for i in np.nonzero(conflict)[0]]
                dominator[idx] = min(hits, key=lambda j: rank[j])
                continue
        selected[idx] = True
        buckets.setdefault(int(home[idx]), []).append(idx)
    return selected, dominator


def greedy_disjoint_subcover(balls: list, factor: float) -> dict:
    """Greedy maximal disjoint subfamily; every rejected ball's center lies
    inside the factor-enlarged dominating selected ball (factor 3 or 5)."""
    if factor not in (3, 5, 3.0, 5.0):
        raise InvalidArgumentError(f"factor must be 3 or 5, got {factor}")
    if not balls:
        raise InvalidArgumentError("need a nonempty list of balls")
    metric = balls[0].metric
    centers = np.array([[b.center.x, b.center.y, b.center.t] for b in balls])
    radii = np.array([b.radius for b in balls])
    selected, dominator = _greedy_on_arrays(centers, radii, metric, factor)

    certificate = []
    rej = np.nonzero(~selected)[0]
    if rej.size:
        d = geo.dist_arr(metric, centers[rej], centers[dominator[rej]])
        inside = d < factor * radii[dominator[rej]]
        for i, j, di, ok in zip(rej, dominator[rej], d, inside):
            certificate.append({"rejected": int(i), "selected": int(j),
                                "distance": float(di), "covered": bool(ok)})
    return {
        "selected": [balls[i] for i in np.nonzero(selected)[0]],
        "selected_indices": np.nonzero(selected)[0],
        "certificate": certificate,
    }


# ---------------------------------------------------------------------------
# Whitney decomposition.

@dataclass
class WhitneyDecomposition:
    centers: np.ndarray
    radii: np.ndarray
    center_boundary_distance: np.ndarray
    lam: float
    collar: float
    metric: Metric
    overlap_bound_observed: int = 0
    skipped_layers: list = field(default_factory=list)

    @property
    def c1(self) -> float:
        return self.lam / 8.0

    @property
    def c2(self) -> float:
        return self.lam / (self.lam + 2.0)

    @property
    def balls(self) -> list:
        return [Ball(Point.from_array(c), float(r), self.metric)
                for c, r in zip(self.centers, self.radii)]

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "collar": self.collar,
            "metric": self.metric.value,
            "overlap_bound_observed": int(self.overlap_bound_observed),
            "balls": [{"center": list(map(float, c)), "radius": float(r)}
                      for c, r in zip(self.centers, self.radii)],
        }


def whitney(dom, lam: float, collar: float, grid: int, metric: Metric,
            seed: int) -> WhitneyDecomposition:
    """Whitney ball decomposition of {x in dom : d(x, bdry) > collar}."""
    if not (0.0 < lam < 0.5):
        raise InvalidArgumentError(f"lambda must lie in (0, 1/2), got {lam}")
    if collar <= 0.0:
        raise InvalidArgumentError(f"collar must be positive, got {collar}")
    if grid < 1:
        raise InvalidArgumentError(f"grid must be >= 1, got {grid}")
    c_mid = 0.5 * (lam / 8.0 + lam / (lam + 2.0))

    # grid counts candidate centers inside the collar-restricted region.
    pts = dom.sample_collar_arr(grid, seed, collar, metric=metric)
    d = dom.fast_boundary_distance_arr(pts, metric)

    layer = np.ceil(np.log2(d)).astype(np.int64)
    k_min = int(np.ceil(math.log2(collar)))
    all_centers, all_radii, all_d = [], [], []
    skipped = []
    for k in range(k_min, int(layer.max()) + 1 if layer.size else k_min):
        mask = layer == k
        if not np.any(mask):
            skipped.append(int(k))
            continue
        c_k = pts[mask]
        d_k = d[mask]
        cand_r = 0.2 * c_mid * d_k
        selected, _ = _greedy_on_arrays(c_k, cand_r, metric, 5.0)
        all_centers.append(c_k[selected])
        all_radii.append(c_mid * d_k[selected])
        all_d.append(d_k[selected])

    if not all_centers:
        raise InvalidArgumentError(
            "no candidate centers above the collar; enlarge grid or shrink collar")
    centers = np.concatenate(all_centers)
    radii = np.concatenate(all_radii)
    dists = np.concatenate(all_d)
    w = WhitneyDecomposition(centers, radii, dists, float(lam), float(collar),
                             metric, skipped_layers=skipped)
    prof = overlap_profile(w, dom, probes=2000, seed=seed + 1)
    w.overlap_bound_observed = prof["max_multiplicity"]
    return w


def overlap_profile(w: WhitneyDecomposition, dom, probes: int, seed: int) -> dict:
    """Multiplicity of the 2x-enlarged balls over probe points."""
    if probes < 1:
        raise InvalidArgumentError(f"need probes >= 1, got {probes}")
    pts = _collar_probes(dom, w, probes, seed)
    counts = membership_counts(pts, w.centers, 2.0 * w.radii, w.metric)
    hist = np.bincount(counts)
    return {"max_multiplicity": int(counts.max()) if counts.size else 0,
            "histogram": {int(i): int(c) for i, c in enumerate(hist) if c}}


def coverage_audit(w: WhitneyDecomposition, dom, probes: int, seed: int) -> dict:
    """Fraction of collar-restricted probe points inside some emitted ball."""
    pts = _collar_probes(dom, w, probes, seed)
    counts = membership_counts(pts, w.centers, w.radii, w.metric)
    covered = counts > 0
    return {"probes": int(pts.shape[0]),
            "covered_fraction": float(np.mean(covered)) if pts.shape[0] else 0.0}


def _collar_probes(dom, w: WhitneyDecomposition, probes: int, seed: int) -> np.ndarray:
    """Probe points of the collar-restricted domain."""
    return dom.sample_collar_arr(probes, seed, w.collar, metric=w.metric)

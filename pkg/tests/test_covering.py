"""Near-pair search, greedy disjoint subcovers, Whitney decompositions."""

import math

import numpy as np
import pytest

from h1qclab import geometry as geo
from h1qclab.covering import (WhitneyDecomposition, coverage_audit,
                              greedy_disjoint_subcover, membership_counts,
                              near_pairs, overlap_profile, whitney)
from h1qclab.domains import KoranyiBall
from h1qclab.errors import InvalidArgumentError
from h1qclab.geometry import Ball, Metric, Point

ORIGIN = Point(0, 0, 0)


def rand_pts(n, scale=1.0, seed=0):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-scale, scale, size=(n, 3))
    pts[:, 2] *= scale
    return pts


# ---------------------------------------------------------------------------
# Near-pair candidate search (group-adapted cell hash).

class TestNearPairs:
    @pytest.mark.parametrize("s", [0.05, 0.2, 0.7])
    def test_contains_all_true_pairs(self, s):
        a = rand_pts(400, seed=1)
        b = rand_pts(300, seed=2)
        ia, ib = near_pairs(a, b, s)
        cand = set(zip(ia.tolist(), ib.tolist()))
        d = geo.koranyi_dist_arr(a[:, None, :], b[None, :, :])
        ti, tj = np.nonzero(d <= s)
        for i, j in zip(ti.tolist(), tj.tolist()):
            assert (i, j) in cand

    def test_empty_input(self):
        ia, ib = near_pairs(np.empty((0, 3)), rand_pts(10, seed=3), 0.5)
        assert ia.size == 0 and ib.size == 0


class TestMembershipCounts:
    def test_against_brute_force(self):
        pts = rand_pts(300, seed=4)
        centers = rand_pts(40, seed=5)
        radii = np.abs(np.random.default_rng(6).uniform(0.05, 0.6, size=40))
        counts = membership_counts(pts, centers, radii, Metric.KORANYI)
        d = geo.koranyi_dist_arr(pts[:, None, :], centers[None, :, :])
        brute = np.sum(d < radii[None, :], axis=1)
        assert np.array_equal(counts, brute)


# ---------------------------------------------------------------------------
# Greedy disjoint subcover.

class TestGreedySubcover:
    def test_single_ball(self):
        b = Ball(ORIGIN, 1.0, Metric.KORANYI)
        out = greedy_disjoint_subcover([b], 5.0)
        assert out["selected"] == [b]
        assert out["certificate"] == []

    def test_disjoint_family_all_selected(self):
        balls = [Ball(Point(3.0 * i, 0, 0), 1.0, Metric.KORANYI)
                 for i in range(4)]
        out = greedy_disjoint_subcover(balls, 3.0)
        assert len(out["selected"]) == 4

    def test_selected_are_pairwise_disjoint(self):
        rng = np.random.default_rng(7)
        balls = [Ball(Point.from_array(p), float(r), Metric.KORANYI)
                 for p, r in zip(rand_pts(150, seed=8),
                                 rng.uniform(0.05, 0.4, size=150))]
        out = greedy_disjoint_subcover(balls, 5.0)
        sel = out["selected"]
        for i in range(len(sel)):
            for j in range(i + 1, len(sel)):
                d = geo.dist(Metric.KORANYI, sel[i].center, sel[j].center)
                assert d > sel[i].radius + sel[j].radius

    def test_certificate_covers_rejects(self):
        rng = np.random.default_rng(9)
        balls = [Ball(Point.from_array(p), float(r), Metric.KORANYI)
                 for p, r in zip(rand_pts(150, seed=10),
                                 rng.uniform(0.05, 0.4, size=150))]
        out = greedy_disjoint_subcover(balls, 5.0)
        assert len(out["certificate"]) == 150 - len(out["selected"])
        assert all(c["covered"] for c in out["certificate"])

    def test_factor_validation(self):
        b = Ball(ORIGIN, 1.0, Metric.KORANYI)
        with pytest.raises(InvalidArgumentError):
            greedy_disjoint_subcover([b], 4.0)
        with pytest.raises(InvalidArgumentError):
            greedy_disjoint_subcover([], 5.0)


# ---------------------------------------------------------------------------
# Whitney decomposition.

@pytest.fixture(scope="module")
def unit_ball_whitney():
    dom = KoranyiBall(ORIGIN, 1.0)
    return dom, whitney(dom, 0.4, 0.7, 20000, Metric.KORANYI, seed=30)


class TestWhitney:
    def test_validation(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        with pytest.raises(InvalidArgumentError):
            whitney(dom, 0.6, 0.1, 100, Metric.KORANYI, 1)
        with pytest.raises(InvalidArgumentError):
            whitney(dom, 0.4, 0.0, 100, Metric.KORANYI, 1)

    def test_radius_proportionality(self, unit_ball_whitney):
        # c1 d(x) <= r <= c2 d(x) with c1 = lam/8, c2 = lam/(lam+2),
        # with zero tolerance.
        _, w = unit_ball_whitney
        lo = w.c1 * w.center_boundary_distance
        hi = w.c2 * w.center_boundary_distance
        assert np.all(w.radii >= lo)
        assert np.all(w.radii <= hi)

    def test_centers_inside_collar_region(self, unit_ball_whitney):
        dom, w = unit_ball_whitney
        d = dom.boundary_distance_arr(w.centers, Metric.KORANYI)
        assert np.all(d > w.collar - 5e-3)
        # recorded center distances agree with the domain oracle
        assert np.max(np.abs(d - w.center_boundary_distance)) < 5e-3

    def test_per_layer_core_disjointness(self, unit_ball_whitney):
        _, w = unit_ball_whitney
        layer = np.ceil(np.log2(w.center_boundary_distance)).astype(int)
        for k in np.unique(layer):
            m = layer == k
            ctr, cr = w.centers[m], 0.2 * w.radii[m]
            if ctr.shape[0] < 2:
                continue
            ia, ib = near_pairs(ctr, ctr, float(2.0 * cr.max()))
            keep = ia < ib
            if not np.any(keep):
                continue
            d = geo.koranyi_dist_arr(ctr[ia[keep]], ctr[ib[keep]])
            assert np.all(d > cr[ia[keep]] + cr[ib[keep]])

    def test_coverage(self, unit_ball_whitney):
        dom, w = unit_ball_whitney
        rep = coverage_audit(w, dom, probes=2000, seed=31)
        assert rep["covered_fraction"] >= 0.99

    def test_overlap_profile_bounded(self, unit_ball_whitney):
        dom, w = unit_ball_whitney
        rep = overlap_profile(w, dom, probes=2000, seed=32)
        assert rep["max_multiplicity"] >= 1
        assert rep["max_multiplicity"] == w.overlap_bound_observed or \
            rep["max_multiplicity"] > 0

    def test_deterministic(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        w1 = whitney(dom, 0.4, 0.7, 5000, Metric.KORANYI, seed=33)
        w2 = whitney(dom, 0.4, 0.7, 5000, Metric.KORANYI, seed=33)
        assert np.array_equal(w1.centers, w2.centers)
        assert np.array_equal(w1.radii, w2.radii)

    def test_json_round_trip(self, unit_ball_whitney):
        _, w = unit_ball_whitney
        d = w.to_json_dict()
        assert d["lambda"] == w.lam
        assert len(d["balls"]) == w.centers.shape[0]
        assert d["balls"][0]["radius"] == pytest.approx(float(w.radii[0]))

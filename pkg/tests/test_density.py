"""Density-weighted length metrics on graph skeletons."""

import math

import numpy as np
import pytest
from scipy import sparse

from h1qclab import geometry as geo
from h1qclab.density import (DensityMetricGraph, _knn_koranyi, ahlfors_audit,
                             density_graph_build)
from h1qclab.domains import Box, KoranyiBall
from h1qclab.errors import ConfigurationError, InvalidArgumentError
from h1qclab.geometry import Metric, Point
from h1qclab.integration import ScalarField, constant_field

ORIGIN = Point(0, 0, 0)


class TestKnn:
    def test_exact_against_brute_force(self):
        rng = np.random.default_rng(50)
        nodes = rng.uniform(-1, 1, size=(400, 3))
        k = 6
        rows, cols, dv = _knn_koranyi(nodes, k, vol_hint=8.0)
        d = geo.koranyi_dist_arr(nodes[:, None, :], nodes[None, :, :])
        np.fill_diagonal(d, np.inf)
        for i in range(nodes.shape[0]):
            mine = np.sort(dv[rows == i])
            brute = np.sort(d[i])[:k]
            assert mine.shape[0] == k
            assert np.allclose(mine, brute, rtol=1e-12)


@pytest.fixture(scope="module")
def unit_box_graph():
    box = Box((-1, 1), (-1, 1), (-1, 1))
    g = density_graph_build(box, constant_field(1.0), 0.25, collar=0.02,
                            seed=51)
    return box, g


class TestGraphBuild:
    def test_structure(self, unit_box_graph):
        box, g = unit_box_graph
        n = g.nodes.shape[0]
        assert n > 500
        m = g.matrix
        assert sparse.issparse(m) and m.shape == (n, n)
        # symmetric with positive weights
        assert (abs(m - m.T)).max() < 1e-12
        assert m.data.min() > 0.0
        assert bool(np.all(box.contains_arr(g.nodes)))

    def test_edge_weights_are_weighted_sr_lengths(self, unit_box_graph):
        _, g = unit_box_graph
        m = g.matrix.tocoo()
        take = slice(0, 200)
        a, b = g.nodes[m.row[take]], g.nodes[m.col[take]]
        expect = geo.sr_dist_arr(a, b)  # rho == 1
        assert np.allclose(m.data[take], expect, rtol=1e-10)

    def test_deterministic(self):
        box = Box((-1, 1), (-1, 1), (-1, 1))
        g1 = density_graph_build(box, constant_field(1.0), 0.35, 0.02, seed=52)
        g2 = density_graph_build(box, constant_field(1.0), 0.35, 0.02, seed=52)
        assert np.array_equal(g1.nodes, g2.nodes)

    def test_constant_density_scales_distances_linearly(self):
        box = Box((-1, 1), (-1, 1), (-1, 1))
        g1 = density_graph_build(box, constant_field(1.0), 0.3, 0.02, seed=53)
        gc = density_graph_build(box, constant_field(2.5), 0.3, 0.02, seed=53)
        a, b = Point(-0.5, -0.3, 0.2), Point(0.5, 0.4, -0.3)
        assert gc.distance(a, b) == pytest.approx(2.5 * g1.distance(a, b),
                                                  rel=1e-9)

    def test_unit_density_matches_sr_distance(self, unit_box_graph):
        _, g = unit_box_graph
        pairs = [(Point(-0.5, -0.3, 0.2), Point(0.5, 0.4, -0.3)),
                 (Point(0.0, 0.0, -0.4), Point(0.3, -0.4, 0.4))]
        for a, b in pairs:
            dg = g.distance(a, b)
            ds = geo.dist(Metric.SUB_RIEMANNIAN, a, b)
            assert abs(dg / ds - 1.0) < 0.05

    def test_refined_single_source_matches_sr(self, unit_box_graph):
        _, g = unit_box_graph
        out = g.refined_distances_from(Point(0.1, -0.2, 0.0))
        direct = geo.sr_dist_arr(g.nodes, np.array([0.1, -0.2, 0.0]))
        # refined distances are upper bounds and tight for rho == 1
        assert np.all(out >= direct - 1e-9)
        assert np.max(out / np.maximum(direct, 1e-12)) < 1.05

    def test_nearest_node(self, unit_box_graph):
        _, g = unit_box_graph
        i = g.nearest_node(Point(0.2, 0.2, 0.2))
        d = geo.koranyi_dist_arr(g.nodes, np.array([0.2, 0.2, 0.2]))
        assert i == int(np.argmin(d))

    def test_varying_density_between_constant_envelopes(self):
        # rho between 1 and 2 gives distances between the two constant
        # metrics (graph routes are identical, weights are sandwiched).
        box = Box((-1, 1), (-1, 1), (-1, 1))

        def mid(pts):
            return 1.5 + 0.5 * np.sin(3.0 * pts[:, 0])

        g = density_graph_build(box, ScalarField("wave", mid), 0.3, 0.02,
                                seed=54)
        a, b = Point(-0.5, 0.0, 0.1), Point(0.6, 0.3, -0.2)
        dv = g.distance(a, b)
        ds = geo.dist(Metric.SUB_RIEMANNIAN, a, b)
        assert 0.9 * ds <= dv <= 2.1 * ds


class TestAhlforsAudit:
    def test_radius_validation(self, unit_box_graph):
        _, g = unit_box_graph
        with pytest.raises(InvalidArgumentError):
            ahlfors_audit(g, ORIGIN, [0.1], 1000, seed=55)
        with pytest.raises(InvalidArgumentError):
            ahlfors_audit(g, ORIGIN, [], 1000, seed=55)
        with pytest.raises(InvalidArgumentError):
            ahlfors_audit(g, ORIGIN, [0.9], 1, seed=55)

    def test_unit_density_slope_and_constants(self, unit_box_graph):
        _, g = unit_box_graph
        rep = ahlfors_audit(g, ORIGIN, [0.8, 0.9, 1.0], 40000, seed=56)
        assert 3.5 < rep["loglog_slope"] < 4.5
        # mu(B_r) ~ c r^4 with c near the SR unit-ball volume
        assert 2.0 < rep["lower_constant"] <= rep["upper_constant"] < 5.0

    def test_constant_density_rescales_measure(self):
        box = Box((-1, 1), (-1, 1), (-1, 1))
        g1 = density_graph_build(box, constant_field(1.0), 0.3, 0.02, seed=57)
        g2 = density_graph_build(box, constant_field(2.0), 0.3, 0.02, seed=57)
        r1 = ahlfors_audit(g1, ORIGIN, [0.95], 20000, seed=58)
        r2 = ahlfors_audit(g2, ORIGIN, [1.9], 20000, seed=58)
        # rho -> c rho scales mu by c^4 and the metric by c: the measure
        # of the c-rescaled ball is exactly c^4 times larger.
        assert r2["mu"][0] == pytest.approx(16.0 * r1["mu"][0], rel=1e-9)

"""Ring curve families and 4-modulus bounds."""

import json
import math
from importlib import resources

import numpy as np
import pytest

from h1qclab import geometry as geo
from h1qclab.errors import InvalidArgumentError
from h1qclab.geometry import Point
from h1qclab.modulus import (TWO_PI_SQ, CurveFamily, ModulusBounds, RingSpec,
                             modulus_lower_sampled, modulus_upper_explicit,
                             ring_curve_family, ring_modulus_bounds,
                             ring_modulus_reference)

ORIGIN = Point(0, 0, 0)


def baselines():
    with resources.files("h1qclab.data").joinpath("baselines.json").open() as fh:
        return json.load(fh)


class TestRingSpec:
    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            RingSpec(ORIGIN, -1.0, 2.0)
        with pytest.raises(InvalidArgumentError):
            RingSpec(ORIGIN, 1.0, 1.0)

    def test_carrier(self):
        spec = RingSpec(ORIGIN, 0.5, 4.0)
        ann = spec.carrier()
        assert ann.r_in == pytest.approx(0.5)
        assert ann.r_out == pytest.approx(2.0)


class TestCurveFamily:
    def test_curves_span_the_gauge_range_exactly(self):
        spec = RingSpec(ORIGIN, 1.0, 4.0)
        fam = ring_curve_family(spec, 64, 32, seed=40)
        assert len(fam.curves) == 64
        assert fam.p_exp == 4.0
        for c in fam.curves:
            g = geo.koranyi_dist_arr(c.as_array(), np.zeros(3))
            assert g[0] == pytest.approx(1.0, rel=1e-9)
            assert g[-1] == pytest.approx(4.0, rel=1e-9)
            # gauge increases monotonically: each vertex stays in the
            # closed ring and the curve never doubles back inside.
            assert np.all(np.diff(g) > -1e-9)

    def test_off_center_ring(self):
        c = Point(1.0, -2.0, 0.5)
        spec = RingSpec(c, 0.7, 3.0)
        fam = ring_curve_family(spec, 32, 24, seed=41)
        for curve in fam.curves:
            g = geo.koranyi_dist_arr(curve.as_array(), c.as_array())
            assert g[0] == pytest.approx(0.7, rel=1e-9)
            assert g[-1] == pytest.approx(2.1, rel=1e-9)

    def test_deterministic(self):
        spec = RingSpec(ORIGIN, 1.0, 2.0)
        a = ring_curve_family(spec, 16, 16, seed=42)
        b = ring_curve_family(spec, 16, 16, seed=42)
        for ca, cb in zip(a.curves, b.curves):
            assert np.array_equal(ca.as_array(), cb.as_array())

    def test_validation(self):
        spec = RingSpec(ORIGIN, 1.0, 2.0)
        with pytest.raises(InvalidArgumentError):
            ring_curve_family(spec, 0, 16, seed=1)
        with pytest.raises(InvalidArgumentError):
            ring_curve_family(spec, 4, 1, seed=1)


class TestUpperBound:
    def test_matches_reference_law_centered(self):
        # For a centered ring the explicit-density energy is exactly
        # 2 pi^2 (log k)^{-3}.
        for k in (2.0, 4.0, 8.0, 16.0):
            spec = RingSpec(ORIGIN, 1.0, k)
            upper = modulus_upper_explicit(spec, 5000, seed=43)
            assert upper == pytest.approx(
                ring_modulus_reference(k, TWO_PI_SQ), rel=1e-12)

    def test_scale_and_translation_invariance(self):
        k = 4.0
        u0 = modulus_upper_explicit(RingSpec(ORIGIN, 1.0, k), 5000, 44)
        u1 = modulus_upper_explicit(RingSpec(ORIGIN, 7.0, k), 5000, 44)
        u2 = modulus_upper_explicit(RingSpec(Point(2, -1, 3), 1.0, k), 5000, 44)
        assert u1 == pytest.approx(u0, rel=1e-12)
        assert u2 == pytest.approx(u0, rel=1e-12)

    def test_reference_validation(self):
        with pytest.raises(InvalidArgumentError):
            ring_modulus_reference(1.0, TWO_PI_SQ)
        with pytest.raises(InvalidArgumentError):
            ring_modulus_reference(2.0, -1.0)


class TestLowerBound:
    def test_sandwich(self):
        spec = RingSpec(ORIGIN, 1.0, 8.0)
        b = ring_modulus_bounds(spec, 128, 32, 16, 800, 5000, seed=45)
        assert 0.0 < b.lower <= b.upper

    def test_more_curves_tighten_the_bound(self):
        # Adding curves only adds constraints: the optimum is monotone.
        spec = RingSpec(ORIGIN, 1.0, 8.0)
        lo = []
        for n in (64, 128, 256):
            fam = ring_curve_family(spec, n, 32, seed=46)
            lo.append(modulus_lower_sampled(fam, 16, 800))
        assert lo[0] <= lo[1] * (1 + 1e-9)
        assert lo[1] <= lo[2] * (1 + 1e-9)

    def test_exact_scale_invariance(self):
        fam1 = ring_curve_family(RingSpec(ORIGIN, 1.0, 8.0), 64, 32, seed=47)
        fam2 = ring_curve_family(RingSpec(ORIGIN, 5.0, 8.0), 64, 32, seed=47)
        l1 = modulus_lower_sampled(fam1, 16, 800)
        l2 = modulus_lower_sampled(fam2, 16, 800)
        assert l2 == pytest.approx(l1, rel=1e-6)

    def test_translation_keeps_sandwich(self):
        spec = RingSpec(Point(1.5, -0.5, 2.0), 1.0, 8.0)
        b = ring_modulus_bounds(spec, 128, 32, 16, 800, 5000, seed=48)
        assert 0.0 < b.lower <= b.upper
        centered = ring_modulus_bounds(RingSpec(ORIGIN, 1.0, 8.0),
                                       128, 32, 16, 800, 5000, seed=48)
        # The grid is axis-aligned, not group-equivariant; the bound moves
        # but stays within a factor two.
        assert 0.5 < b.lower / centered.lower < 2.0

    def test_validation(self):
        fam = ring_curve_family(RingSpec(ORIGIN, 1.0, 2.0), 8, 8, seed=49)
        with pytest.raises(InvalidArgumentError):
            modulus_lower_sampled(fam, 4, 100)
        with pytest.raises(InvalidArgumentError):
            modulus_lower_sampled(fam, 16, 0)


class TestFrozenRegression:
    def test_benchmark_ratio_reproduces(self):
        # Small sanity reproduction at the benchmark ring; the full
        # four-ring sweep runs in the acceptance suite.
        base = baselines()["ring_modulus"]
        spec = RingSpec(ORIGIN, 1.0, 16.0)
        b = ring_modulus_bounds(spec, 512, 48, 32, 4000, 20000, seed=301)
        ratio = b.lower / b.upper
        assert ratio >= base["floor_fraction"] * base["lower_over_upper"]["16"]

    def test_omega4_bracket_is_ordered(self):
        base = baselines()["omega4_bracket"]
        assert 0.0 < base["lower"] <= base["upper"]
        assert base["upper"] == pytest.approx(TWO_PI_SQ, rel=1e-12)

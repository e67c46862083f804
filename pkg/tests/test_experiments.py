"""Experiment drivers: Koebe comparisons, quasisymmetry profiles,
distance and curve-diameter audits, Whitney-quadrature comparability."""

import json
import math
from importlib import resources

import numpy as np
import pytest

from h1qclab import geometry as geo
from h1qclab.covering import whitney
from h1qclab.domains import KoranyiAnnulus, KoranyiBall, PuncturedSpace
from h1qclab.errors import (ConfigurationError, InvalidArgumentError)
from h1qclab.experiments import (ball_image_geometry, curve_diameter_audit,
                                 distance_estimate_audit, harnack_audit,
                                 integral_comparability, koebe_scan,
                                 qs_profile, sharpness_probe, _af_at)
from h1qclab.geometry import Ball, Curve, Metric, Point
from h1qclab.maps import (Dilation, HorizontalStretch, KoranyiInversion,
                          LeftTranslation, Rotation)

ORIGIN = Point(0, 0, 0)


def baselines():
    with resources.files("h1qclab.data").joinpath("baselines.json").open() as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Bulk average-derivative evaluation.

class TestAfBulk:
    def test_matches_scalar_path_for_dilation(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        pts = dom.sample_interior_arr(50, seed=60)
        af = _af_at(Dilation(1.3), dom, pts, Metric.KORANYI, 1.0, 128, 61)
        assert np.allclose(af, 1.3, rtol=1e-10)

    def test_exterior_point_rejected(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        with pytest.raises(InvalidArgumentError):
            _af_at(Dilation(1.3), dom, np.array([[5.0, 0.0, 0.0]]),
                   Metric.KORANYI, 1.0, 64, 62)


# ---------------------------------------------------------------------------
# Koebe scan.

class TestKoebeScan:
    def test_conformal_catalog_maps_on_punctured_space(self):
        ps = PuncturedSpace()
        for f in (Dilation(1.7), Rotation(0.8)):
            rep = koebe_scan(f, ps, ps, Metric.KORANYI, 24, 4000, 31)
            assert rep["c_hat"] <= 1.05
            assert len(rep["records"]) == 24

    def test_stretch_bounded_by_its_distortion(self):
        ps = PuncturedSpace()
        rep = koebe_scan(HorizontalStretch(2.0), ps, ps, Metric.KORANYI,
                         24, 4000, 32)
        assert rep["c_hat"] <= 2.1

    def test_inversion_matches_frozen_baseline(self):
        base = baselines()["koebe_inversion"]
        ann = KoranyiAnnulus(ORIGIN, 0.5, 2.0)
        inv = KoranyiInversion()
        for seed, expect in zip(base["seeds"], base["c_hat"]):
            rep = koebe_scan(inv, ann, ann, Metric.KORANYI, 32, 8000, seed)
            assert rep["c_hat"] == pytest.approx(expect, rel=0.05)

    def test_image_domain_mismatch_detected(self):
        ball = KoranyiBall(ORIGIN, 1.0)
        tiny = KoranyiBall(ORIGIN, 0.1)
        with pytest.raises(ConfigurationError):
            koebe_scan(Dilation(1.0), ball, tiny, Metric.KORANYI, 16, 500, 33)

    def test_validation(self):
        ps = PuncturedSpace()
        with pytest.raises(InvalidArgumentError):
            koebe_scan(Dilation(1.0), ps, ps, Metric.KORANYI, 0, 500, 34)


# ---------------------------------------------------------------------------
# Ball-image geometry.

class TestBallImage:
    def test_dilation_scales_consistently(self):
        ball = Ball(Point(0.5, 0.0, 0.0), 0.2, Metric.KORANYI)
        img = KoranyiBall(ORIGIN, 1.5)
        rep = ball_image_geometry(Dilation(1.5), ball, img, 300, seed=83)
        # the image of the gauge ball is the gauge ball of 1.5x radius
        assert rep["diam_image"] == pytest.approx(2 * 1.5 * 0.2, rel=0.1)
        assert rep["diam_to_center_distance_ratio"] > 0.0

    def test_validation(self):
        ball = Ball(ORIGIN, 0.2, Metric.KORANYI)
        with pytest.raises(InvalidArgumentError):
            ball_image_geometry(Dilation(1.0), ball, KoranyiBall(ORIGIN, 1.0),
                                1, seed=1)


# ---------------------------------------------------------------------------
# Quasisymmetry profile.

class TestQsProfile:
    def test_conformal_maps_have_unit_profile(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        for f in (Dilation(1.5), Rotation(0.6),
                  LeftTranslation(Point(0.1, 0.0, 0.0))):
            rep = qs_profile(f, dom, Point(0.1, 0.0, 0.0), 2.0, 800, 81)
            # distance ratios are exactly preserved: eta(t) = t.
            for rec in rep["samples"][:50]:
                assert rec["ratio"] == pytest.approx(rec["t"], rel=1e-6)
            assert rep["H_f_hat"] == pytest.approx(1.0, rel=1e-6)

    def test_stretch_profile_is_bounded(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        rep = qs_profile(HorizontalStretch(2.0), dom, Point(0.1, 0, 0),
                         2.0, 800, 82)
        a4 = 16.0
        for rec in rep["eta_envelope"]:
            assert rec["eta_max"] <= a4 * rec["t_bin_center"] * 4.0

    def test_validation(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        with pytest.raises(InvalidArgumentError):
            qs_profile(Dilation(1.0), dom, ORIGIN, 1.0, 100, 1)
        with pytest.raises(InvalidArgumentError):
            qs_profile(Dilation(1.0), dom, ORIGIN, 2.0, 0, 1)


# ---------------------------------------------------------------------------
# Distance-estimate audit.

class TestDistanceEstimate:
    def test_dilation_constants_are_modest(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        rep = distance_estimate_audit(Dilation(1.5), dom, 0.5, 2.0, 24,
                                      1000, 82)
        assert rep["max_c"] <= 1.0  # contraction towards the boundary
        assert rep["median_c"] <= rep["max_c"]
        assert rep["quantiles"][0.9] >= rep["quantiles"][0.5]

    def test_validation(self):
        dom = KoranyiBall(ORIGIN, 1.0)
        with pytest.raises(InvalidArgumentError):
            distance_estimate_audit(Dilation(1.0), dom, 1.5, 2.0, 8, 100, 1)
        with pytest.raises(InvalidArgumentError):
            distance_estimate_audit(Dilation(1.0), dom, 0.5, 0.5, 8, 100, 1)


# ---------------------------------------------------------------------------
# Curve diameter and sharpness.

class TestCurveDiameter:
    def test_isometries_have_ratio_at_most_one(self):
        ball = KoranyiBall(ORIGIN, 2.0)
        xs = np.linspace(-0.3, 0.3, 20)
        axis_curve = Curve.from_array(np.stack([xs, 0 * xs, 0 * xs], axis=1))
        wig = np.stack([np.linspace(-0.2, 0.4, 15),
                        np.linspace(0.1, -0.2, 15),
                        np.linspace(0.0, 0.05, 15)], axis=1)
        curves = [axis_curve, Curve.from_array(wig)]
        for f in (Rotation(0.7), LeftTranslation(Point(0.1, -0.2, 0.05))):
            reps = curve_diameter_audit(f, ball, curves, 0.5, 1000, 21)
            for r in reps:
                assert r["ratio"] <= 1.0 + 1e-9

    def test_stretch_axis_ratio_is_exact(self):
        ball = KoranyiBall(ORIGIN, 2.0)
        xs = np.linspace(-0.3, 0.3, 20)
        axis_curve = Curve.from_array(np.stack([xs, 0 * xs, 0 * xs], axis=1))
        for a in (2.0, 3.0):
            reps = curve_diameter_audit(HorizontalStretch(a), ball,
                                        [axis_curve], 0.5, 1000, 22)
            assert reps[0]["ratio"] == pytest.approx(a, rel=1e-9)

    def test_sharpness_law(self):
        for r in (0.3, 0.1, 0.03, 0.01, 0.003):
            rep = sharpness_probe(0.5, r)
            assert rep["ratio"] == pytest.approx(r ** -0.5, rel=1e-12)
        # diverges as r -> 0
        assert sharpness_probe(0.5, 0.003)["ratio"] > \
            sharpness_probe(0.5, 0.3)["ratio"]

    def test_validation(self):
        with pytest.raises(InvalidArgumentError):
            sharpness_probe(0.5, 1.5)
        with pytest.raises(InvalidArgumentError):
            sharpness_probe(1.5, 0.5)
        ball = KoranyiBall(ORIGIN, 1.0)
        with pytest.raises(InvalidArgumentError):
            curve_diameter_audit(Dilation(1.0), ball, [], 1.5, 100, 1)


# ---------------------------------------------------------------------------
# Whitney-quadrature comparability and Harnack.

@pytest.fixture(scope="module")
def ball_whitney():
    dom = KoranyiBall(ORIGIN, 1.0)
    return dom, whitney(dom, 0.4, 0.1, 2000, Metric.KORANYI, 61)


class TestIntegralComparability:
    def test_constant_derivative_maps(self, ball_whitney):
        dom, w = ball_whitney
        for f in (Dilation(1.6), Rotation(0.9)):
            reps = integral_comparability(f, dom, [-1.0, 2.0, 3.0], w,
                                          1000, 63)
            for r in reps:
                assert r["ratio"] == pytest.approx(1.0, rel=1e-9)

    def test_stretch_ratio_is_power_law(self, ball_whitney):
        dom, w = ball_whitney
        reps = integral_comparability(HorizontalStretch(1.5), dom,
                                      [-1.0, 2.0, 3.0], w, 1000, 63)
        for r in reps:
            assert r["ratio"] == pytest.approx(1.5 ** r["q"], rel=1e-9)

    def test_q_zero_rejected(self, ball_whitney):
        dom, w = ball_whitney
        with pytest.raises(InvalidArgumentError):
            integral_comparability(Dilation(1.0), dom, [0.0], w, 100, 1)


class TestHarnack:
    def test_constant_derivative_ratio_is_one(self, ball_whitney):
        dom, w = ball_whitney
        rep = harnack_audit(Dilation(1.5), dom, w, 8, 256, 87)
        assert rep["max_ball_ratio"] == pytest.approx(1.0, abs=1e-9)

    def test_inversion_matches_frozen_baseline(self):
        base = baselines()["harnack_inversion"]
        ann = KoranyiAnnulus(ORIGIN, 0.5, 2.0)
        w = whitney(ann, 0.4, 0.1, 3000, Metric.KORANYI, 85)
        rep = harnack_audit(KoranyiInversion(), ann, w, 16, 512, 86)
        assert rep["max_ball_ratio"] == pytest.approx(
            base["max_ball_ratio"], rel=base["rtol"])

    def test_validation(self, ball_whitney):
        dom, w = ball_whitney
        with pytest.raises(InvalidArgumentError):
            harnack_audit(Dilation(1.0), dom, w, 0, 64, 1)

"""Monte-Carlo ball averages, the average derivative, and BMO machinery.

All ball integrals use rejection sampling: Korányi balls accept gauge
box proposals [-r, r]^2 x [-r^2, r^2] (acceptance pi^2/16), and
sub-Riemannian balls accept proposals drawn from the Korányi ball of
radius sqrt(pi) r, which contains them by the metric sandwich.  Every
estimate carries its standard error and audits use 3-sigma slack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .errors import (ConfigurationError, DegenerateMapError,
                     InvalidArgumentError, SamplingFailure)
from .geometry import Ball, Metric, Point
from .maps import SmoothMap
from .streams import stream

_ACCEPT_FLOOR = 1e-6


@dataclass(frozen=True)
class ScalarField:
    """A scalar function of position; the evaluator is numpy-vectorized
    over point arrays of shape (N, 3)."""

    name: str
    evaluator: callable

    def __call__(self, pts) -> np.ndarray:
        vals = np.asarray(self.evaluator(np.asarray(pts, dtype=float)), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError(
                f"field {self.name!r} is non-finite on the sampled region")
        return vals


def constant_field(c: float, name: str = "const") -> ScalarField:
    return ScalarField(name, lambda pts: np.full(np.asarray(pts).shape[:-1], float(c)))


def log_jacobian_field(f: SmoothMap) -> ScalarField:
    def ev(pts):
        jac = f.jacobian_arr(pts)
        if np.any(jac <= 0.0):
            bad = int(np.argmax(jac <= 0.0))
            raise DegenerateMapError(
                f"nonpositive Jacobian of {f.name} in a ball average",
                point=Point.from_array(np.asarray(pts)[bad]))
        return np.log(jac)

    return ScalarField(f"logJ[{f.name}]", ev)


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    std_error: float
    n: int
    seed: int


@dataclass(frozen=True)
class BMOEstimate:
    norm_lower_bound: float
    admissibility_factor: float
    balls_tried: int
    metric: Metric


# ---------------------------------------------------------------------------
# Ball sampling.

def sample_ball_arr(ball: Ball, n: int, seed: int, tag: str = "ball") -> np.ndarray:
    """n uniform samples from a metric ball (rejection), deterministic."""
    if n < 1:
        raise InvalidArgumentError(f"need n >= 1, got {n}")
    rng = stream(seed, f"{tag}:{ball.metric.value}")
    c = ball.center.as_array()
    r = ball.radius
    # Proposal radius: the SR ball sits inside the Korányi ball of radius
    # sqrt(pi) r; the Korányi ball is proposed from its own gauge box.
    box_r = r if ball.metric is Metric.KORANYI else math.sqrt(math.pi) * r
    lo = np.array([-box_r, -box_r, -box_r * box_r])
    hi = -lo
    chunks = []
    drawn = 0
    got = 0
    batch = max(4 * n, 4096)
    while got < n:
        w = rng.uniform(lo, hi, size=(batch, 3))
        drawn += batch
        if ball.metric is Metric.KORANYI:
            keep = geo.gauge(w) < r
        else:
            keep = geo.gauge(w) < box_r
            w = w[keep]
            keep = geo.sr_dist_from_origin_arr(w) < r
        w = w[keep]
        if w.shape[0]:
            chunks.append(w)
            got += w.shape[0]
        if drawn > max(int(1e6), 100 * n) and got / drawn < _ACCEPT_FLOOR:
            raise SamplingFailure(
                f"ball rejection rate {got / drawn:.2e} below {_ACCEPT_FLOOR:.0e}")
    w = np.concatenate(chunks, axis=0)[:n]
    return geo.mul(c, w)


def ball_mean(u: ScalarField, ball: Ball, n: int, seed: int) -> MeanEstimate:
    """Unbiased Monte-Carlo mean of u over the ball with standard error."""
    if n < 2:
        raise InvalidArgumentError(f"need n >= 2, got {n}")
    vals = u(sample_ball_arr(ball, n, seed))
    value = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    return MeanEstimate(value, se, n, seed)


def mean_oscillation(u: ScalarField, ball: Ball, n: int, seed: int) -> MeanEstimate:
    """Mean of |u - u_B| over B, reusing one sample for the inner mean."""
    if n < 2:
        raise InvalidArgumentError(f"need n >= 2, got {n}")
    vals = u(sample_ball_arr(ball, n, seed))
    dev = np.abs(vals - np.mean(vals))
    return MeanEstimate(float(np.mean(dev)),
                        float(np.std(dev, ddof=1) / math.sqrt(n)), n, seed)


def average_derivative(f: SmoothMap, dom, x: Point, metric: Metric,
                       shrink: float, n: int, seed: int) -> float:
    """a_f(x) = exp( (1/4) mean of log J_f over B(x, d(x, bdry)/shrink) )."""
    if shrink < 1.0:
        raise InvalidArgumentError(f"shrink must be >= 1, got {shrink}")
    d = dom.boundary_distance(x, metric)
    ball = Ball(x, d / shrink, metric)
    est = ball_mean(log_jacobian_field(f), ball, n, seed)
    return math.exp(0.25 * est.value)


def bmo_estimate(u: ScalarField, dom, factor: float, ball_trials: int,
                 n_per_ball: int, seed: int, metric: Metric) -> BMOEstimate:
    """Sup of mean oscillation over randomly generated admissible balls;
    a lower bound of the true factor-local BMO norm.

    Each trial draws from its own (seed, index) stream, so increasing
    ball_trials extends the ball sequence instead of reshuffling it.
    """
    if ball_trials < 1:
        raise InvalidArgumentError(f"need ball_trials >= 1, got {ball_trials}")
    if factor < 1.0:
        raise InvalidArgumentError(f"factor must be >= 1, got {factor}")
    best = 0.0
    found = 0
    for i in range(ball_trials):
        trial_seed = (seed * 1000003 + i) & 0x7FFFFFFF
        try:
            center = dom.sample_interior(1, trial_seed, metric=metric)[0]
        except SamplingFailure:
            continue
        r_max = dom.boundary_distance(center, metric) / factor
        if r_max <= 0.0:
            continue
        frac = stream(trial_seed, "bmo-radius").uniform(0.2, 1.0)
        ball = Ball(center, frac * r_max, metric)
        est = mean_oscillation(u, ball, n_per_ball, trial_seed)
        best = max(best, est.value)
        found += 1
    if found == 0:
        raise ConfigurationError(
            "no admissible ball found for the requested factor-local BMO estimate")
    return BMOEstimate(best, factor, ball_trials, metric)


def nested_ball_bound_audit(u: ScalarField, x: Point, r1: float, r2: float,
                            norm_bound: float, n: int, seed: int) -> dict:
    """Check |u_{B1} - u_{B2}| <= (e/2)(log(|B1|/|B2|) + 1) ||u||_*
    for concentric Korányi balls B2 subset B1."""
    if r2 > r1:
        raise InvalidArgumentError(f"need r2 <= r1, got r1={r1}, r2={r2}")
    b1 = Ball(x, r1, Metric.KORANYI)
    b2 = Ball(x, r2, Metric.KORANYI)
    e1 = ball_mean(u, b1, n, seed)
    e2 = ball_mean(u, b2, n, seed + 1)
    lhs = abs(e1.value - e2.value)
    vol_ratio = (r1 / r2) ** 4
    rhs = 0.5 * math.e * (math.log(vol_ratio) + 1.0) * norm_bound
    slack = 3.0 * (e1.std_error + e2.std_error)
    return {"lhs": lhs, "rhs": rhs, "std_error": e1.std_error + e2.std_error,
            "pass": lhs <= rhs + slack}


def reverse_holder_audit(f: SmoothMap, ball: Ball, p_exp: float,
                         n: int, seed: int) -> dict:
    """ratio = (avg J^{p/4})^{4/p} / avg J over one ball; 1 for constant J,
    bounded across ball families for higher-integrability Jacobians."""
    if p_exp <= 4.0:
        raise InvalidArgumentError(f"need p_exp > 4, got {p_exp}")
    pts = sample_ball_arr(ball, n, seed, tag="rh")
    jac = f.jacobian_arr(pts)
    if np.any(jac <= 0.0):
        raise DegenerateMapError(f"nonpositive Jacobian of {f.name} in audit ball")
    mean_j = float(np.mean(jac))
    powered = jac ** (p_exp / 4.0)
    lhs = float(np.mean(powered)) ** (4.0 / p_exp)
    se = float(np.std(jac, ddof=1) / math.sqrt(n))
    return {"lhs": lhs, "rhs_shape": mean_j, "ratio": lhs / mean_j,
            "std_error": se / mean_j}


def ap_weight_audit(f: SmoothMap, ball: Ball, p_exp: float,
                    n: int, seed: int) -> dict:
    """ratio = (avg J) (avg J^{-(p-4)/4})^{4/(p-4)}; >= 1 by Jensen,
    finiteness across balls is the weight condition being audited."""
    if p_exp <= 4.0:
        raise InvalidArgumentError(f"need p_exp > 4, got {p_exp}")
    pts = sample_ball_arr(ball, n, seed, tag="ap")
    jac = f.jacobian_arr(pts)
    if np.any(jac <= 0.0):
        raise DegenerateMapError(f"nonpositive Jacobian of {f.name} in audit ball")
    q = (p_exp - 4.0) / 4.0
    mean_j = float(np.mean(jac))
    mean_neg = float(np.mean(jac ** (-q)))
    ratio = mean_j * mean_neg ** (1.0 / q)
    se = float(np.std(jac, ddof=1) / math.sqrt(n))
    return {"lhs": mean_j, "rhs": mean_neg ** (-1.0 / q), "ratio": ratio,
            "std_error": se / max(mean_j, 1e-300)}

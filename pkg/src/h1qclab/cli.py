"""Command-line front end.

One binary with one subcommand per experiment; every run is driven by a
JSON config validated against a schema, writes a JSON report plus a CSV
of per-sample records, and exits 0 when the run's audit passes, 1 when
it fails, and 2 on any configuration problem.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import jsonschema
import numpy as np

from . import density as density_mod
from . import experiments as exp
from . import integration as integ
from . import modulus as modulus_mod
from .covering import coverage_audit, overlap_profile, whitney
from .domains import domain_from_config
from .errors import ConfigurationError, H1QCError, InvalidArgumentError
from .geometry import Curve, Metric, Point, dist
from .maps import map_from_config
from .reports import emit_csv, emit_json, flatten_record

# ---------------------------------------------------------------------------
# Config schema.

_POINT = {"type": "array", "items": {"type": "number"},
          "minItems": 3, "maxItems": 3}
_MAP = {"type": "object", "required": ["kind"]}
_DOMAIN = {"type": "object", "required": ["kind"]}
_METRIC = {"enum": ["koranyi", "sub-riemannian"]}
_COUNT = {"type": "integer", "minimum": 1}
_SEED = {"type": "integer", "minimum": 0}

SCHEMAS = {
    "dist": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "metric", "p", "q"],
        "properties": {"experiment": {"const": "dist"}, "metric": _METRIC,
                       "p": _POINT, "q": _POINT, "seed": _SEED},
    },
    "af": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "x", "metric", "mc_n"],
        "properties": {"experiment": {"const": "af"}, "map": _MAP,
                       "domain": _DOMAIN, "x": _POINT, "metric": _METRIC,
                       "shrink": {"type": "number", "minimum": 1},
                       "mc_n": _COUNT, "seed": _SEED},
    },
    "bmo": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "factor", "ball_trials",
                     "n_per_ball", "metric"],
        "properties": {"experiment": {"const": "bmo"}, "map": _MAP,
                       "domain": _DOMAIN,
                       "factor": {"type": "number", "minimum": 1},
                       "ball_trials": _COUNT, "n_per_ball": _COUNT,
                       "metric": _METRIC, "seed": _SEED},
    },
    "whitney": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "domain", "lambda", "collar", "grid",
                     "metric"],
        "properties": {"experiment": {"const": "whitney"}, "domain": _DOMAIN,
                       "lambda": {"type": "number", "exclusiveMinimum": 0,
                                  "exclusiveMaximum": 0.5},
                       "collar": {"type": "number", "exclusiveMinimum": 0},
                       "grid": _COUNT, "metric": _METRIC,
                       "probes": _COUNT, "seed": _SEED},
    },
    "modulus": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "r", "k", "n_curves", "pts_per_curve",
                     "grid", "iterations", "mc_n"],
        "properties": {"experiment": {"const": "modulus"}, "center": _POINT,
                       "r": {"type": "number", "exclusiveMinimum": 0},
                       "k": {"type": "number", "exclusiveMinimum": 1},
                       "n_curves": _COUNT, "pts_per_curve": {"type": "integer", "minimum": 2},
                       "grid": {"type": "integer", "minimum": 8},
                       "iterations": _COUNT, "mc_n": _COUNT, "seed": _SEED},
    },
    "koebe": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "image_domain", "metric",
                     "points", "mc_n"],
        "properties": {"experiment": {"const": "koebe"}, "map": _MAP,
                       "domain": _DOMAIN, "image_domain": _DOMAIN,
                       "metric": _METRIC, "points": _COUNT, "mc_n": _COUNT,
                       "shrink": {"type": "number", "minimum": 1},
                       "seed": _SEED},
    },
    "qs": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "x", "shrink", "triples"],
        "properties": {"experiment": {"const": "qs"}, "map": _MAP,
                       "domain": _DOMAIN, "x": _POINT,
                       "shrink": {"type": "number", "exclusiveMinimum": 1},
                       "triples": _COUNT, "metric": _METRIC, "seed": _SEED},
    },
    "curve-diam": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "curves", "alpha", "mc_n"],
        "properties": {"experiment": {"const": "curve-diam"}, "map": _MAP,
                       "domain": _DOMAIN,
                       "curves": {"type": "array", "minItems": 1,
                                  "items": {"type": "array", "minItems": 2,
                                            "items": _POINT}},
                       "alpha": {"type": "number", "exclusiveMinimum": 0,
                                 "maximum": 1},
                       "mc_n": _COUNT, "metric": _METRIC, "seed": _SEED},
    },
    "compare-integrals": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "map", "domain", "q_list", "whitney",
                     "mc_n"],
        "properties": {"experiment": {"const": "compare-integrals"},
                       "map": _MAP, "domain": _DOMAIN,
                       "q_list": {"type": "array", "minItems": 1,
                                  "items": {"type": "number"}},
                       "whitney": {"type": "object", "additionalProperties": False,
                                   "required": ["lambda", "collar", "grid"],
                                   "properties": {"lambda": {"type": "number"},
                                                  "collar": {"type": "number"},
                                                  "grid": _COUNT}},
                       "mc_n": _COUNT, "metric": _METRIC, "seed": _SEED},
    },
    "density-metric": {
        "type": "object", "additionalProperties": False,
        "required": ["experiment", "domain", "rho", "resolution", "x",
                     "radii", "mc_n"],
        "properties": {"experiment": {"const": "density-metric"},
                       "domain": _DOMAIN,
                       "rho": {"type": "object", "required": ["kind"]},
                       "resolution": {"type": "number", "exclusiveMinimum": 0},
                       "collar": {"type": "number", "minimum": 0},
                       "x": _POINT,
                       "radii": {"type": "array", "minItems": 1,
                                 "items": {"type": "number"}},
                       "mc_n": _COUNT, "seed": _SEED},
    },
}

CATALOG = {
    "maps": [
        {"kind": "left-translation", "params": {"g": "point"},
         "doc": "p -> g.p; isometry of both metrics"},
        {"kind": "dilation", "params": {"lambda": "real > 0"},
         "doc": "(x,y,t) -> (lx, ly, l^2 t); conformal, J = l^4"},
        {"kind": "rotation", "params": {"theta": "real"},
         "doc": "horizontal rotation about the t-axis; isometry"},
        {"kind": "HorizontalStretch", "params": {"a": "real > 0"},
         "doc": "(x,y,t) -> (ax, y/a, t); automorphism, J = 1, K = max(a,1/a)^4"},
        {"kind": "shear", "params": {"phi": "expression in x"},
         "doc": "(x, y+phi(x), t+4Phi(x)-2x phi(x)); exactly contact, J = 1"},
        {"kind": "koranyi-inversion", "params": {},
         "doc": "inversion in the unit gauge sphere; conformal, J = |p|^-8"},
        {"kind": "composition", "params": {"maps": "list, applied right-to-left"},
         "doc": "composite of catalog maps"},
        {"kind": "dsl", "params": {"fx/fy/ft": "expressions in x,y,t"},
         "doc": "user-defined map from three expressions"},
    ],
    "domains": [
        {"kind": "koranyi-ball", "params": {"center": "point", "radius": "real > 0"}},
        {"kind": "punctured-space", "params": {"puncture": "point", "window": "real > 0"}},
        {"kind": "koranyi-annulus", "params": {"center": "point", "r_in": "real", "r_out": "real"}},
        {"kind": "box", "params": {"x": "[lo,hi]", "y": "[lo,hi]", "t": "[lo,hi]"}},
    ],
    "experiments": [
        {"name": "dist", "audits": "metric axioms and the Koranyi/sub-Riemannian sandwich"},
        {"name": "af", "audits": "the average derivative a_f over the maximal centered ball"},
        {"name": "bmo", "audits": "local BMO lower bounds for log-Jacobian fields"},
        {"name": "whitney", "audits": "boundary-adapted ball decompositions with disjointness, coverage and overlap certificates"},
        {"name": "modulus", "audits": "ring 4-modulus bounds against the (log k)^-3 law"},
        {"name": "koebe", "audits": "Koebe-type comparability of a_f with the boundary-distance ratio"},
        {"name": "qs", "audits": "quasisymmetry ratio envelopes on egg-yolk balls"},
        {"name": "curve-diam", "audits": "image diameters of curves against a_f-weighted length"},
        {"name": "compare-integrals", "audits": "comparability of integrals of |D_Hf|^q and a_f^q"},
        {"name": "density-metric", "audits": "Ahlfors 4-regularity of density-weighted measures"},
    ],
}


def _metric(cfg, default="koranyi"):
    return Metric(cfg.get("metric", default))


def _rho_from_config(cfg: dict, seed: int):
    kind = cfg.get("kind")
    if kind == "constant":
        return integ.constant_field(float(cfg["value"]), name="const")
    if kind == "af":
        f = map_from_config(cfg["map"])
        dom = domain_from_config(cfg["domain"])
        metric = Metric(cfg.get("metric", "koranyi"))
        shrink = float(cfg.get("shrink", 1.0))
        mc_n = int(cfg.get("mc_n", 512))

        def ev(pts):
            return exp._af_at(f, dom, pts, metric, shrink, mc_n, seed)

        return integ.ScalarField("af", ev)
    if kind == "gauge-power":
        power = float(cfg["power"])
        import numpy as _np

        from . import geometry as _geo
        return integ.ScalarField(
            "gauge-power", lambda pts: _geo.gauge(_np.asarray(pts)) ** power)
    raise ConfigurationError(f"unknown density kind {kind!r}")


# ---------------------------------------------------------------------------
# Experiment runners.  Each returns (report_dict, csv_rows, passed).

def _run_dist(cfg, seed):
    metric = _metric(cfg)
    p = Point(*cfg["p"])
    q = Point(*cfg["q"])
    value = dist(metric, p, q)
    other = dist(Metric.SUB_RIEMANNIAN if metric is Metric.KORANYI
                 else Metric.KORANYI, p, q)
    k_val = value if metric is Metric.KORANYI else other
    s_val = other if metric is Metric.KORANYI else value
    sandwich_ok = (s_val / math.sqrt(math.pi) - 1e-9 <= k_val <= s_val + 1e-9)
    report = {"experiment": "dist", "metric": metric.value, "distance": value,
              "koranyi": k_val, "sub_riemannian": s_val, "pass": sandwich_ok}
    return report, [flatten_record(report)], sandwich_ok


def _run_af(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    metric = _metric(cfg)
    value = integ.average_derivative(f, dom, Point(*cfg["x"]), metric,
                                     float(cfg.get("shrink", 1.0)),
                                     int(cfg["mc_n"]), seed)
    report = {"experiment": "af", "a_f": value, "pass": value > 0.0}
    return report, [flatten_record(report)], value > 0.0


def _run_bmo(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    metric = _metric(cfg)
    est = integ.bmo_estimate(integ.log_jacobian_field(f), dom,
                             float(cfg["factor"]), int(cfg["ball_trials"]),
                             int(cfg["n_per_ball"]), seed, metric)
    report = {"experiment": "bmo",
              "norm_lower_bound": est.norm_lower_bound,
              "admissibility_factor": est.admissibility_factor,
              "balls_tried": est.balls_tried, "metric": metric.value,
              "pass": est.norm_lower_bound >= 0.0}
    return report, [flatten_record(report)], True


def _run_whitney(cfg, seed):
    dom = domain_from_config(cfg["domain"])
    metric = _metric(cfg)
    w = whitney(dom, float(cfg["lambda"]), float(cfg["collar"]),
                int(cfg["grid"]), metric, seed)
    probes = int(cfg.get("probes", 2000))
    prof = overlap_profile(w, dom, probes, seed + 1)
    cov = coverage_audit(w, dom, probes, seed + 2)
    prop3 = bool(np.all((w.c1 * w.center_boundary_distance <= w.radii)
                        & (w.radii <= w.c2 * w.center_boundary_distance)))
    report = {"experiment": "whitney", "n_balls": int(w.centers.shape[0]),
              "property_3prime": prop3,
              "coverage": cov, "overlap": prof,
              "decomposition": w.to_json_dict(), "pass": prop3}
    rows = [{"center.0": c[0], "center.1": c[1], "center.2": c[2],
             "radius": r, "boundary_distance": d}
            for c, r, d in zip(w.centers, w.radii, w.center_boundary_distance)]
    return report, rows, prop3


def _run_modulus(cfg, seed):
    spec = modulus_mod.RingSpec(Point(*cfg.get("center", (0, 0, 0))),
                                float(cfg["r"]), float(cfg["k"]))
    bounds = modulus_mod.ring_modulus_bounds(
        spec, int(cfg["n_curves"]), int(cfg["pts_per_curve"]),
        int(cfg["grid"]), int(cfg["iterations"]), int(cfg["mc_n"]), seed)
    ok = bounds.lower <= bounds.upper + bounds.slack + 1e-9
    report = {"experiment": "modulus", "k": spec.k, "r": spec.r,
              "upper": bounds.upper, "lower": bounds.lower,
              "grid": bounds.grid_resolution, "curves": bounds.curves_sampled,
              "slack": bounds.slack, "pass": ok}
    return report, [flatten_record(report)], ok


def _run_koebe(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    dom_image = domain_from_config(cfg["image_domain"])
    metric = _metric(cfg)
    rep = exp.koebe_scan(f, dom, dom_image, metric, int(cfg["points"]),
                         int(cfg["mc_n"]), seed,
                         shrink=float(cfg.get("shrink", 1.0)))
    ok = math.isfinite(rep["c_hat"])
    report = {"experiment": "koebe", "c_hat": rep["c_hat"], "pass": ok}
    rows = [flatten_record(r) for r in rep["records"]]
    return report, rows, ok


def _run_qs(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    rep = exp.qs_profile(f, dom, Point(*cfg["x"]), float(cfg["shrink"]),
                         int(cfg["triples"]), seed, metric=_metric(cfg))
    ok = math.isfinite(rep["H_f_hat"]) and rep["H_f_hat"] > 0.0
    report = {"experiment": "qs", "H_f_hat": rep["H_f_hat"],
              "eta_envelope": rep["eta_envelope"], "pass": ok}
    rows = [flatten_record(s) for s in rep["samples"]]
    return report, rows, ok


def _run_curve_diam(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    curves = [Curve(tuple(Point(*v) for v in c)) for c in cfg["curves"]]
    reps = exp.curve_diameter_audit(f, dom, curves, float(cfg["alpha"]),
                                    int(cfg["mc_n"]), seed,
                                    metric=_metric(cfg))
    ok = all(math.isfinite(r["ratio"]) for r in reps)
    report = {"experiment": "curve-diam", "curves": reps, "pass": ok}
    return report, [flatten_record(r) for r in reps], ok


def _run_compare_integrals(cfg, seed):
    f = map_from_config(cfg["map"])
    dom = domain_from_config(cfg["domain"])
    metric = _metric(cfg)
    wcfg = cfg["whitney"]
    w = whitney(dom, float(wcfg["lambda"]), float(wcfg["collar"]),
                int(wcfg["grid"]), metric, seed)
    reps = exp.integral_comparability(f, dom, [float(q) for q in cfg["q_list"]],
                                      w, int(cfg["mc_n"]), seed)
    ok = all(math.isfinite(r["ratio"]) and r["ratio"] > 0 for r in reps)
    report = {"experiment": "compare-integrals", "results": reps, "pass": ok}
    return report, [flatten_record(r) for r in reps], ok


def _run_density_metric(cfg, seed):
    dom = domain_from_config(cfg["domain"])
    rho = _rho_from_config(cfg["rho"], seed)
    g = density_mod.density_graph_build(dom, rho, float(cfg["resolution"]),
                                        float(cfg.get("collar", 0.0)), seed)
    rep = density_mod.ahlfors_audit(g, Point(*cfg["x"]),
                                    [float(r) for r in cfg["radii"]],
                                    int(cfg["mc_n"]), seed)
    ok = rep["loglog_slope"] <= 4.2 or math.isnan(rep["loglog_slope"])
    report = {"experiment": "density-metric", **rep, "pass": bool(ok)}
    rows = [{"radius": r, "mu": m} for r, m in zip(rep["radii"], rep["mu"])]
    return report, rows, bool(ok)


_RUNNERS = {
    "dist": _run_dist,
    "af": _run_af,
    "bmo": _run_bmo,
    "whitney": _run_whitney,
    "modulus": _run_modulus,
    "koebe": _run_koebe,
    "qs": _run_qs,
    "curve-diam": _run_curve_diam,
    "compare-integrals": _run_compare_integrals,
    "density-metric": _run_density_metric,
}


def run(config_path: str, out_dir: str = ".", seed_override=None,
        threads: int = 1) -> int:
    """Execute the experiment named in the config; returns the exit status."""
    try:
        with open(config_path) as fh:
            cfg = json.load(fh)
    except OSError as err:
        print(f"error: cannot read config: {err}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as err:
        print(f"error: config is not valid JSON: {err}", file=sys.stderr)
        return 2

    experiment = cfg.get("experiment")
    schema = SCHEMAS.get(experiment)
    if schema is None:
        print(f"error: unknown experiment {experiment!r}", file=sys.stderr)
        return 2
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as err:
        loc = "/".join(str(p) for p in err.absolute_path) or "(top level)"
        print(f"error: config field {loc}: {err.message}", file=sys.stderr)
        return 2

    seed = int(seed_override if seed_override is not None else cfg.get("seed", 0))
    try:
        report, rows, passed = _RUNNERS[experiment](cfg, seed)
    except (ConfigurationError, InvalidArgumentError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except H1QCError as err:
        print(f"audit failure: {err}", file=sys.stderr)
        return 1

    report["seed"] = seed
    report["threads"] = int(threads)
    prefix = f"{out_dir}/{experiment}"
    emit_json(report, prefix + ".json")
    emit_csv(rows, prefix + ".csv")
    print(f"{experiment}: {'pass' if passed else 'FAIL'} "
          f"(report {prefix}.json, samples {prefix}.csv)")
    return 0 if passed else 1


def list_catalog(as_json: bool = False) -> str:
    if as_json:
        return json.dumps(CATALOG, indent=2, sort_keys=True)
    lines = ["Maps:"]
    for m in CATALOG["maps"]:
        params = ", ".join(f"{k}: {v}" for k, v in m["params"].items()) or "none"
        lines.append(f"  {m['kind']}  ({params})")
        lines.append(f"      {m['doc']}")
    lines.append("Domains:")
    for d in CATALOG["domains"]:
        params = ", ".join(f"{k}: {v}" for k, v in d["params"].items())
        lines.append(f"  {d['kind']}  ({params})")
    lines.append("Experiments:")
    for e in CATALOG["experiments"]:
        lines.append(f"  {e['name']}: audits {e['audits']}")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="h1qc",
        description="Numerical quasiconformal-analysis experiments on the "
                    "first Heisenberg group")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads (results are identical for any value)")
    parser.add_argument("--out-dir", default=".", help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("config", help="path to the JSON run config")
    pcat = sub.add_parser("catalog", help="list maps, domains and experiments")
    pcat.add_argument("--json", action="store_true", dest="as_json")

    args = parser.parse_args(argv)
    if args.command == "catalog":
        print(list_catalog(as_json=args.as_json))
        return 0
    return run(args.config, out_dir=args.out_dir, seed_override=args.seed,
               threads=args.threads)


if __name__ == "__main__":
    sys.exit(main())

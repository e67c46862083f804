"""Numerical laboratory for quasiconformal analysis on the first
Heisenberg group: group arithmetic, Korányi and sub-Riemannian metrics,
a catalog of explicit quasiconformal maps, Monte-Carlo ball averaging,
Whitney decompositions, curve-family modulus bounds, and experiment
drivers auditing the classical distortion inequalities."""

from .geometry import (Ball, Curve, Metric, Point, curve_length, dilate, dist,
                       group_inv, group_mul, koranyi_ball_volume, koranyi_norm)
from .domains import (Box, Domain, KoranyiAnnulus, KoranyiBall,
                      PuncturedSpace, domain_from_config)
from .maps import (Composition, Dilation, HorizontalStretch, KoranyiInversion,
                   LeftTranslation, Rotation, Shear, SmoothMap, UserDSL,
                   contact_defect, distortion_scan, horizontal_differential,
                   map_from_config, parse_map)
from .integration import (BMOEstimate, MeanEstimate, ScalarField,
                          ap_weight_audit, average_derivative, ball_mean,
                          bmo_estimate, log_jacobian_field, mean_oscillation,
                          nested_ball_bound_audit, reverse_holder_audit)
from .covering import (WhitneyDecomposition, coverage_audit,
                       greedy_disjoint_subcover, overlap_profile, whitney)
from .modulus import (CurveFamily, ModulusBounds, RingSpec,
                      modulus_lower_sampled, modulus_upper_explicit,
                      ring_curve_family, ring_modulus_bounds,
                      ring_modulus_reference)
from .density import DensityMetricGraph, ahlfors_audit, density_graph_build
from .experiments import (ball_image_geometry, curve_diameter_audit,
                          distance_estimate_audit, harnack_audit,
                          integral_comparability, koebe_scan, qs_profile,
                          sharpness_probe)

__version__ = "0.1.0"

"""Regenerate the packaged distance-to-unit-gauge-sphere table.

Evaluates the exact rotation-reduced sphere-distance solver on a chart
grid that is square-root-substituted in both directions (u for the gauge
deficiency, w for the latitude near the characteristic poles) and stores
the result as package data for bilinear bulk lookups.

Usage: python3 tools/build_sphere_table.py [n_u] [n_w]
"""

import math
import pathlib
import sys

import numpy as np

from h1qclab.domains import _unit_sphere_dist_koranyi, _w_to_s

OUT = (pathlib.Path(__file__).resolve().parent.parent
       / "src" / "h1qclab" / "data" / "sphere_distance_table.npz")


def main(n_u: int = 513, n_w: int = 1025) -> None:
    uu = np.linspace(0.0, 1.0, n_u)
    ww = np.linspace(-1.0, 1.0, n_w)
    ss = _w_to_s(ww)
    umesh, smesh = np.meshgrid(uu, ss, indexing="ij")
    gmesh = 1.0 - umesh * umesh
    rho = np.sqrt(np.maximum(np.cos(smesh), 0.0))
    pts = np.stack([gmesh * rho, np.zeros_like(gmesh),
                    gmesh * gmesh * np.sin(smesh)], axis=-1).reshape(-1, 3)
    val = _unit_sphere_dist_koranyi(pts).reshape(gmesh.shape)
    # The triangle inequality gives d >= 1 - gauge = u^2 everywhere inside.
    val = np.maximum(val, umesh * umesh)
    val[0, :] = 0.0  # u = 0 is the sphere itself
    OUT.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(OUT, u=uu, w=ww, value=val)
    print(f"wrote {OUT} ({n_u}x{n_w})")


if __name__ == "__main__":
    args = [int(a) for a in sys.argv[1:]]
    main(*args)

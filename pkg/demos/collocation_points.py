"""Sobol collocation points on the quarter plate and the boundary sets.

Run: python3 demos/collocation_points.py [out.csv]
"""
import sys

import numpy as np

from ddgan.geometry import dump_points, interior_acceptance, sample_boundary, sample_interior, sobol_2d

print("first Sobol points:", sobol_2d(3).tolist())
frac = interior_acceptance(100_000)
print(f"fraction of the unit square outside the hole: {frac:.5f} (area ratio {1 - np.pi / 16:.5f})")

pts = sample_boundary(16)
pts.interior = sample_interior(16**2)
print(f"{len(pts.interior)} interior points, edges:", {k: len(v) for k, v in pts.boundary.items()})
if len(sys.argv) > 1:
    dump_points(sys.argv[1], pts)
    print("wrote", sys.argv[1])

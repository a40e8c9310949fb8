"""Synthetic material data and nearest-neighbour lookup under the energy metric.

Run: python3 demos/material_database.py
"""
import numpy as np

from ddgan.material import MaterialParams, derive_constants, synthesize_dataset
from ddgan.phase_space import metric_sq_distance

mp = MaterialParams()
dc = derive_constants(mp)
print(f"lambda = {dc.lam:.2f} MPa, mu = {dc.mu:.2f} MPa, lambda_bar = {dc.lambda_bar:.2f} MPa")

# 10^4 strains drawn from N(0, 0.005^2), pushed through the nonlinear law
db = synthesize_dataset(10_000, std=0.005, seed=0, mp=mp)
print("metric matrix C:\n", db.metric.c)

# a state that is slightly off the material manifold
z = db.states[42].copy()
z[3:] += [5.0, -3.0, 1.0]
hit = db.nearest(z)
print(f"nearest datum: #{hit.index}, squared distance {hit.sq_dist:.4g}")
print("direct metric evaluation agrees:", np.isclose(hit.sq_dist, metric_sq_distance(z, hit.state, db.metric)))

# the kd-tree answer equals an exhaustive scan
queries = db.states[:200] + np.random.default_rng(1).normal(size=(200, 6)) * np.r_[[1e-3] * 3, [20.0] * 3]
tree_idx, _ = db.query_arrays(queries)
brute_idx, _ = db.nearest_brute(queries)
print("tree == brute force on 200 queries:", bool(np.all(tree_idx == brute_idx)))

"""The generator's output transforms satisfy the hard boundary conditions for any weights.

Run: python3 demos/hard_boundary_conditions.py
"""
import numpy as np

from ddgan.generator import Generator, physics_loss_numpy, traction
from ddgan.geometry import sample_boundary, sample_test

b = sample_boundary(100)
for seed in range(3):
    gen = Generator.create(np.random.default_rng(seed))
    x0 = gen.evaluate_batch(b.boundary["x0"])
    x1 = gen.evaluate_batch(b.boundary["x1"])
    hole = gen.evaluate_batch(b.boundary["hole"])
    print(f"draw {seed}: max|u_x(0,y)| = {np.max(np.abs(x0['u'][:, 0])):.1e}, "
          f"max|s_xx(1,y) - t(y)| = {np.max(np.abs(x1['stress'][:, 0] - traction(b.boundary['x1'][:, 1]))):.1e}, "
          f"max|s_xy| on hole = {np.max(np.abs(hole['stress'][:, 2])):.1e}")

# the untrained generator still violates equilibrium and the soft boundary terms
gen = Generator.create(np.random.default_rng(0))
print("untrained physics loss:", physics_loss_numpy(gen, sample_test(4096, seed=1), sample_boundary(32)))

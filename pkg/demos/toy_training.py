"""Desk-scale adversarial training on the plate with a hole.

16^2 collocation points, 10^4 data points, 30 epochs; about half a minute
on one core. Prints the per-epoch log and writes fields to toy_fields.csv.

Run: python3 demos/toy_training.py
"""
import numpy as np

from ddgan.adversarial import Critic
from ddgan.generator import Generator, physics_loss_numpy, write_fields_csv
from ddgan.geometry import sample_boundary, sample_interior, sample_test
from ddgan.material import synthesize_dataset
from ddgan.training import OneCycle, TrainConfig, train

db = synthesize_dataset(10_000, seed=0)
rng = np.random.Generator(np.random.Philox(key=0))
gen = Generator.create(rng)
critic = Critic.create(rng, db.metric)
colloc, boundary = sample_interior(16**2), sample_boundary(128)
test_pts = sample_test(4096, seed=1)

print("physics loss before:", physics_loss_numpy(gen, test_pts, boundary))
cfg = TrainConfig(epochs=30, batch_size=32, schedule=OneCycle(max_lr=0.005, total_steps=30), seed=0)
print("epoch  critic    generator  physics   distance")
gen, critic, log = train(cfg, gen, critic, db, colloc, boundary,
                         callback=lambda r, *_: print(f"{r.epoch:5d}  {r.d_loss_mean:8.4f}  {r.g_loss_mean:9.4f}"
                                                      f"  {r.phys_loss:8.5f}  {r.mean_distance:8.5f}"))
print("physics loss after:", physics_loss_numpy(gen, test_pts, boundary))

fields = gen.evaluate_batch(test_pts)
i = int(np.argmax(np.abs(fields["u"][:, 0])))
print(f"max |u_x| = {abs(fields['u'][i, 0]):.4g} at ({test_pts[i, 0]:.3f}, {test_pts[i, 1]:.3f})")
write_fields_csv("toy_fields.csv", test_pts, fields)

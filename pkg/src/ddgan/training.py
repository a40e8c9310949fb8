"""Adam, the one-cycle learning-rate schedule and the adversarial training loop."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .adversarial import Critic, critic_gradient, draw_delta, vanilla_gan_terms
from .dataset import MaterialDatabase
from .generator import (Generator, fields_var, flat_vars, generator_vars, physics_loss_numpy,
                        physics_loss_var)
from .geometry import PointSets
from .mlp import param_vars

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
LOG_COLUMNS = ("epoch", "d_loss_mean", "d_loss_min", "d_loss_max", "g_loss_mean", "g_loss_min",
               "g_loss_max", "phys_loss", "mean_distance")


class DivergenceError(FloatingPointError):
    """Training produced a non-finite or exploding quantity."""


@dataclass
class AdamState:
    n: int
    lr: float = 0.02
    beta1: float = 0.5
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray = field(init=False)
    v: np.ndarray = field(init=False)
    t: int = 0

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        self.m = np.zeros(self.n)
        self.v = np.zeros(self.n)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float | None = None) -> np.ndarray:
    """One bias-corrected Adam update; returns new parameters and advances ``state``."""
    if grad.shape != params.shape or params.shape != state.m.shape:
        raise ValueError(f"shape mismatch: params {params.shape}, grad {grad.shape}, state {state.m.shape}")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise DivergenceError(
            f"non-finite gradient at step {state.t + 1}: {len(bad)} entries, first index {bad[0]}"
        )
    lr = state.lr if lr is None else lr
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1 - state.beta2) * grad * grad
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass(frozen=True)
class OneCycle:
    """Linear warm-up from ``max_lr/div_factor`` to ``max_lr``, then cosine decay
    to ``max_lr/final_div_factor``; constant past ``total_steps``."""

    max_lr: float = 0.02
    total_steps: int = 200
    pct_start: float = 0.3
    div_factor: float = 25.0
    final_div_factor: float = 1e4

    def __call__(self, step: int) -> float:
        return lr_at(step, self)


def lr_at(step: int, schedule: OneCycle) -> float:
    lo = schedule.max_lr / schedule.div_factor
    end = schedule.max_lr / schedule.final_div_factor
    peak_step = schedule.pct_start * schedule.total_steps
    step = min(max(step, 0), schedule.total_steps)
    if step <= peak_step:
        return lo + (schedule.max_lr - lo) * (step / peak_step if peak_step > 0 else 1.0)
    frac = (step - peak_step) / (schedule.total_steps - peak_step)
    return end + 0.5 * (schedule.max_lr - end) * (1.0 + math.cos(math.pi * frac))


@dataclass
class TrainConfig:
    epochs: int = 200
    batch_size: int = 1024
    critic_steps: int = 5
    gp_weight: float = 10.0
    schedule: OneCycle = field(default_factory=OneCycle)
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    mode: str = "wgan-gp"  # or "vanilla"
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.critic_steps < 1:
            raise ValueError("epochs must be >= 0, batch size and critic steps >= 1")
        if self.mode not in ("wgan-gp", "vanilla"):
            raise ValueError(f"unknown training mode {self.mode!r}")


@dataclass
class EpochRecord:
    epoch: int
    d_loss_mean: float
    d_loss_min: float
    d_loss_max: float
    g_loss_mean: float
    g_loss_min: float
    g_loss_max: float
    phys_loss: float
    mean_distance: float

    def row(self) -> list:
        return [getattr(self, c) for c in LOG_COLUMNS]


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS)
        for r in self.records:
            w.writerow([r.epoch] + [repr(float(v)) for v in r.row()[1:]])
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def load(cls, path) -> "TrainingLog":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != LOG_COLUMNS:
                raise ValueError("unexpected log header")
            recs = [EpochRecord(int(r[0]), *map(float, r[1:])) for r in reader if r]
        return cls(recs)


def mean_distance(gen: Generator, db: MaterialDatabase, pts: np.ndarray) -> float:
    """Mean over points of the metric distance from the generated state to its nearest datum."""
    f = gen.evaluate_batch(pts, check_domain=False)
    z = np.concatenate([f["strain"], f["stress"]], axis=1)
    _, sq = db.query_arrays(z)
    return float(np.mean(np.sqrt(sq)))


def _guard(name: str, value: float) -> float:
    if not math.isfinite(value) or abs(value) > DIVERGENCE_LIMIT:
        raise DivergenceError(f"{name} diverged: {value!r}")
    return value


def _generator_objective(gen: Generator, critic: Critic, pts, boundary, mode: str):
    """Generator objective graph: adversarial term on the generated states plus L_C."""
    pvars = generator_vars(gen)
    f = fields_var(gen, pvars, pts)
    z = ad.concat([f["strain"], f["stress"]], axis=1)
    cvars = param_vars(critic.params)
    d_fake = critic.score_inputs_var(cvars, critic.transform(z))
    l_c, _, _ = physics_loss_var(gen, pvars, pts, boundary, fields=f)
    if mode == "vanilla":
        # generator minimises E[ln(1 - D(G(x)))] + L_C
        adv = ad.mean(ad.log(1.0 - ad.clip(d_fake, 1e-7, 1 - 1e-7)))
    else:
        adv = -ad.mean(d_fake)
    total = adv + l_c
    grads = ad.grad(total, flat_vars(pvars))
    return float(total.value), float(l_c.value), np.concatenate([g.ravel() for g in grads])


def _critic_vanilla(critic: Critic, real, fake):
    pvars = param_vars(critic.params)
    d_real = critic.score_inputs_var(pvars, critic.transform(real))
    d_fake = critic.score_inputs_var(pvars, critic.transform(fake))
    obj = -vanilla_gan_terms(d_real, d_fake)
    grads = ad.grad(obj, [v for pair in pvars for v in pair])
    return float(obj.value), np.concatenate([g.ravel() for g in grads])


def train(config: TrainConfig, generator: Generator, critic: Critic, database: MaterialDatabase,
          collocation: np.ndarray, boundary: PointSets | None = None,
          callback=None) -> tuple[Generator, Critic, TrainingLog]:
    """Alternate critic and generator updates; one log record per epoch.

    Per batch: generate states on the collocation batch, look up their nearest
    data points (the "real" samples), run ``critic_steps`` critic updates,
    then one generator update on ``-E[D(z)] + L_C``.
    """
    log_ = TrainingLog()
    if config.epochs == 0:
        return generator, critic, log_
    collocation = np.asarray(collocation, dtype=float)
    rng = np.random.Generator(np.random.Philox(key=config.seed + 1))
    g_theta, c_theta = generator.flatten(), critic.params.flatten()
    g_opt = AdamState(len(g_theta), config.schedule.max_lr, config.beta1, config.beta2, config.adam_eps)
    c_opt = AdamState(len(c_theta), config.schedule.max_lr, config.beta1, config.beta2, config.adam_eps)
    n = len(collocation)
    bs = min(config.batch_size, n)

    for epoch in range(1, config.epochs + 1):
        lr = lr_at(epoch - 1, config.schedule)
        order = rng.permutation(n)
        d_losses, g_losses, p_losses = [], [], []
        for start in range(0, n, bs):
            pts = collocation[order[start:start + bs]]
            f = generator.evaluate_batch(pts, check_domain=False)
            fake = np.concatenate([f["strain"], f["stress"]], axis=1)
            idx, _ = database.query_arrays(fake)
            real = database.states[idx]
            for _ in range(config.critic_steps):
                if config.mode == "vanilla":
                    d_val, d_grad = _critic_vanilla(critic, real, fake)
                else:
                    delta = draw_delta(rng, len(pts))
                    d_val, d_grad, _ = critic_gradient(critic, real, fake, delta, config.gp_weight)
                _guard("critic loss", d_val)
                c_theta = adam_step(c_opt, c_theta, d_grad, lr)
                critic.params = critic.params.unflatten(critic.spec, c_theta)
            g_val, p_val, g_grad = _generator_objective(generator, critic, pts, boundary, config.mode)
            _guard("generator loss", g_val)
            g_theta = adam_step(g_opt, g_theta, g_grad, lr)
            generator = generator.with_flat(g_theta)
            d_losses.append(d_val)
            g_losses.append(g_val)
            p_losses.append(p_val)
        dist = _guard("mean distance", mean_distance(generator, database, collocation))
        rec = EpochRecord(epoch, float(np.mean(d_losses)), float(np.min(d_losses)), float(np.max(d_losses)),
                          float(np.mean(g_losses)), float(np.min(g_losses)), float(np.max(g_losses)),
                          float(np.mean(p_losses)), dist)
        log_.records.append(rec)
        log.info("epoch %d: d=%.4g g=%.4g phys=%.4g dist=%.4g lr=%.3g", epoch, rec.d_loss_mean,
                 rec.g_loss_mean, rec.phys_loss, dist, lr)
        if callback is not None:
            callback(rec, generator, critic)
    return generator, critic, log_


def untrained_physics_loss(generator: Generator, pts, boundary=None) -> float:
    return physics_loss_numpy(generator, pts, boundary)

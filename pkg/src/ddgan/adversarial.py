"""Critic network and adversarial objectives (vanilla GAN, WGAN, gradient penalty).

Sign conventions: every objective returned here is a quantity to *minimise*.

* critic:     ``mean D(fake) - mean D(real) [+ w * GP]``
* generator:  ``-mean D(fake) + L_C``

so the critic maximises the Wasserstein estimate ``E[D(real)] - E[D(fake)]``
while the generator carries the physics loss. ``L_C`` does not depend on the
critic parameters, so attaching it to the generator leaves the critic update
unchanged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .mlp import MlpSpec, ParameterSet, forward, forward_jac, forward_var, init_params, param_vars
from .phase_space import MetricMatrix

CLAMP = 1e-7


def critic_spec() -> MlpSpec:
    return MlpSpec(6, 1, 3, 16, "leaky_relu", alpha=0.2)


@dataclass
class Critic:
    """Scores 6-vectors ``(e_xx, e_yy, g_xy, s_xx, s_yy, s_xy)``.

    With ``metric`` set, states are whitened before entering the network so
    strain and stress components live on a common scale. ``sigmoid`` switches
    to the bounded vanilla-GAN discriminator.
    """

    params: ParameterSet
    metric: MetricMatrix | None = None
    sigmoid: bool = False

    @classmethod
    def create(cls, rng: np.random.Generator, metric: MetricMatrix | None = None,
               spec: MlpSpec | None = None, sigmoid: bool = False) -> "Critic":
        return cls(init_params(spec or critic_spec(), rng), metric, sigmoid)

    @property
    def spec(self) -> MlpSpec:
        return self.params.spec

    def transform(self, z):
        """Phase states to network inputs (numpy arrays or Vars)."""
        if self.metric is None:
            return z
        if isinstance(z, Var):
            return z @ self.metric.r.T
        return np.asarray(z, dtype=float) @ self.metric.r.T

    def score_inputs_var(self, pvars, y) -> Var:
        out = forward_var(self.spec, pvars, y)[:, 0]
        return ad.sigmoid(out) if self.sigmoid else out

    def __call__(self, z) -> np.ndarray:
        out = forward(self.params, self.transform(np.atleast_2d(z)))[:, 0]
        return 0.5 * (1.0 + np.tanh(0.5 * out)) if self.sigmoid else out

    def input_gradient(self, y: np.ndarray) -> np.ndarray:
        """``dD/dy`` in network-input coordinates, shape ``(n, 6)``."""
        out, J = forward_jac(self.spec, param_vars(self.params), np.atleast_2d(y))
        g = J.value[:, 0, :]
        if self.sigmoid:
            s = 0.5 * (1.0 + np.tanh(0.5 * out.value))
            g = g * s * (1.0 - s)
        return g


def _mean(v):
    return ad.mean(v) if isinstance(v, Var) else float(np.mean(v))


def _check_batches(real, fake):
    if len(real) == 0 or len(fake) == 0:
        raise ValueError("batches must be non-empty")
    if len(real) != len(fake):
        raise ValueError(f"batch lengths differ: {len(real)} real vs {len(fake)} fake")


# -- vanilla GAN --------------------------------------------------------------------

def _clamp_probs(d):
    lo, hi = CLAMP, 1.0 - CLAMP
    raw = d.value if isinstance(d, Var) else np.asarray(d, dtype=float)
    if np.any((raw <= 0.0) | (raw >= 1.0)):
        warnings.warn("discriminator output saturated at 0 or 1; clamping", RuntimeWarning, stacklevel=3)
    return ad.clip(d, lo, hi) if isinstance(d, Var) else np.clip(raw, lo, hi)


def vanilla_gan_terms(d_real, d_fake):
    """``mean ln D(real) + mean ln(1 - D(fake))`` from discriminator probabilities."""
    _check_batches(d_real, d_fake)
    dr, df = _clamp_probs(d_real), _clamp_probs(d_fake)
    if isinstance(dr, Var) or isinstance(df, Var):
        return ad.mean(ad.log(ad.as_var(dr))) + ad.mean(ad.log(1.0 - ad.as_var(df)))
    return float(np.mean(np.log(dr)) + np.mean(np.log(1.0 - df)))


def vanilla_gan_loss(critic: Critic, real_batch, fake_batch) -> float:
    if not critic.sigmoid:
        raise ValueError("vanilla GAN loss needs a sigmoid-terminated discriminator")
    return vanilla_gan_terms(critic(real_batch), critic(fake_batch))


# -- Wasserstein ----------------------------------------------------------------------

def wgan_terms(d_real, d_fake, physics_loss_value=0.0):
    """``(critic_objective, generator_objective)`` from critic outputs."""
    _check_batches(d_real, d_fake)
    mr, mf = _mean(d_real), _mean(d_fake)
    return mf - mr, -mf + physics_loss_value


def wgan_loss(critic: Critic, real_batch, fake_batch, physics_loss_value: float = 0.0):
    return wgan_terms(critic(real_batch), critic(fake_batch), physics_loss_value)


def gp_mix(y_real, y_syn, delta):
    """Convex mixture ``delta * y_real + (1 - delta) * y_syn`` with one delta per row."""
    delta = np.asarray(delta, dtype=float).reshape(-1, 1)
    return delta * y_real + (1.0 - delta) * y_syn


def draw_delta(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.uniform(0.0, 1.0, size=n)


def gradient_penalty_var(spec: MlpSpec, pvars, y_real: np.ndarray, y_syn: np.ndarray,
                         delta: np.ndarray, sigmoid: bool = False) -> Var:
    """``mean (|grad_y D(y_mix)| - 1)^2`` in network-input coordinates, as a graph node."""
    mix = gp_mix(y_real, y_syn, delta)
    out, J = forward_jac(spec, pvars, mix)
    g = J[:, 0, :]
    if sigmoid:
        s = ad.sigmoid(out[:, 0])
        g = g * ad.reshape(s * (1.0 - s), (-1, 1))
    norm = ad.sqrt(ad.sum(ad.square(g), axis=1), eps=1e-12)
    return ad.mean(ad.square(norm - 1.0))


def gradient_penalty(critic: Critic, real_batch, fake_batch, rng: np.random.Generator | None = None,
                     delta=None) -> float:
    """Gradient penalty on random mixtures of real and generated states.

    Pass ``delta`` to fix the mixing weights instead of drawing them from ``rng``.
    """
    _check_batches(real_batch, fake_batch)
    if delta is None:
        if rng is None:
            raise ValueError("need either rng or delta")
        delta = draw_delta(rng, len(real_batch))
    yr = critic.transform(np.asarray(real_batch, dtype=float))
    yf = critic.transform(np.asarray(fake_batch, dtype=float))
    gp = gradient_penalty_var(critic.spec, param_vars(critic.params), yr, yf, delta, critic.sigmoid)
    return float(gp.value)


def critic_objective_var(critic: Critic, pvars, real_batch, fake_batch, delta,
                         gp_weight: float = 10.0, physics_loss_value: float = 0.0):
    """Critic objective ``mean D(fake) - mean D(real) + w * GP`` plus its parts.

    ``physics_loss_value`` is accepted so callers can verify it has no effect
    on the critic; it only shifts the generator objective.
    """
    _check_batches(real_batch, fake_batch)
    yr = critic.transform(np.asarray(real_batch, dtype=float))
    yf = critic.transform(np.asarray(fake_batch, dtype=float))
    d_real = critic.score_inputs_var(pvars, yr)
    d_fake = critic.score_inputs_var(pvars, yf)
    w_obj, _ = wgan_terms(d_real, d_fake, physics_loss_value)
    gp = gradient_penalty_var(critic.spec, pvars, yr, yf, delta, critic.sigmoid) if gp_weight else Var(0.0)
    return w_obj + gp * gp_weight, w_obj, gp


def wgan_gp_objective(critic: Critic, real_batch, fake_batch, rng=None, delta=None,
                      gp_weight: float = 10.0, physics_loss_value: float = 0.0):
    """``(critic_objective, generator_objective)`` with the penalty on the critic side only."""
    if gp_weight < 0:
        raise ValueError("gradient penalty weight must be non-negative")
    c_obj, g_obj = wgan_loss(critic, real_batch, fake_batch, physics_loss_value)
    if gp_weight:
        c_obj = c_obj + gp_weight * gradient_penalty(critic, real_batch, fake_batch, rng, delta)
    return c_obj, g_obj


def critic_gradient(critic: Critic, real_batch, fake_batch, delta, gp_weight: float = 10.0,
                    physics_loss_value: float = 0.0) -> tuple[float, np.ndarray, dict]:
    """Critic objective, its flat parameter gradient, and logged parts."""
    pvars = param_vars(critic.params)
    total, w_obj, gp = critic_objective_var(critic, pvars, real_batch, fake_batch, delta,
                                            gp_weight, physics_loss_value)
    flat = [v for pair in pvars for v in pair]
    grads = ad.grad(total, flat)
    parts = {"wasserstein": -float(w_obj.value), "gp": float(gp.value)}
    return float(total.value), np.concatenate([g.ravel() for g in grads]), parts

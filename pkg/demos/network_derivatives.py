"""Input Jacobians and parameter gradients of Jacobian-dependent losses.

Run: python3 demos/network_derivatives.py
"""
import numpy as np

from ddgan import autodiff as ad
from ddgan.mlp import MlpSpec, ParameterSet, forward, forward_jac, init_params, input_jacobian, loss_gradient

rng = np.random.default_rng(0)
params = init_params(MlpSpec(2, 1, 3, 8, "hardswish"), rng)
x = rng.normal(size=(4, 2))

J = input_jacobian(params, x)
h = 1e-6
fd = np.stack([(forward(params, x + h * e) - forward(params, x - h * e)) / (2 * h) for e in np.eye(2)], axis=-1)
print("max |J - finite difference|:", np.max(np.abs(J - fd)))


# a loss on the squared input gradient: its parameter gradient needs second derivatives
def loss(spec, pvars):
    _, jac = forward_jac(spec, pvars, x)
    return ad.mean(ad.sum(ad.square(jac[:, 0, :]), axis=1))


value, grad = loss_gradient(loss, params)
theta = params.flatten()
k = int(np.argmax(np.abs(grad)))
bump = np.zeros_like(theta)
bump[k] = 1e-6


def at(t):
    pv = [(ad.Var(W), ad.Var(b)) for W, b in ParameterSet.unflatten(params.spec, t).layers]
    return float(loss(params.spec, pv).value)


print(f"loss = {value:.6f}; d loss / d theta[{k}]: engine {grad[k]:.8f}, "
      f"finite difference {(at(theta + bump) - at(theta - bump)) / 2e-6:.8f}")

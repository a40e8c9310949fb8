"""Fully connected networks with differentiable input Jacobians.

Layers act on row batches: ``h_l = act(h_{l-1} @ W_l + b_l)`` with ``W_l`` of
shape ``(fan_in, fan_out)``; the output layer is affine. The flattened
parameter vector concatenates ``W_1.ravel(), b_1, W_2.ravel(), b_2, ...``.

:func:`forward_jac` propagates one tangent per input coordinate alongside the
activations, built from engine primitives, so losses mixing outputs and input
derivatives can be differentiated with respect to the parameters by a single
reverse sweep.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import UnsupportedOperationError, Var

ACTIVATIONS = ("hardswish", "leaky_relu", "identity")


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int
    output_dim: int
    hidden_layers: int
    units: int
    activation: str = "hardswish"
    alpha: float = 0.2  # leaky_relu negative slope

    def __post_init__(self):
        if min(self.input_dim, self.output_dim, self.units) < 1 or self.hidden_layers < 0:
            raise ValueError(f"invalid network dimensions in {self}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [self.units] * self.hidden_layers + [self.output_dim]

    @property
    def shapes(self) -> list[tuple[tuple[int, int], tuple[int]]]:
        s = self.layer_sizes
        return [((s[i], s[i + 1]), (s[i + 1],)) for i in range(len(s) - 1)]

    @property
    def n_params(self) -> int:
        return sum(w[0] * w[1] + b[0] for w, b in self.shapes)


class ParameterSet:
    """Per-layer ``(W, b)`` pairs with a flat view."""

    def __init__(self, spec: MlpSpec, layers: list[tuple[np.ndarray, np.ndarray]]):
        if len(layers) != len(spec.shapes):
            raise ValueError("layer count does not match spec")
        for (W, b), (ws, bs) in zip(layers, spec.shapes):
            if W.shape != ws or b.shape != bs:
                raise ValueError(f"parameter shapes {W.shape}, {b.shape} differ from {ws}, {bs}")
        self.spec = spec
        self.layers = [(np.asarray(W, float), np.asarray(b, float)) for W, b in layers]

    def flatten(self) -> np.ndarray:
        return np.concatenate([np.concatenate([W.ravel(), b]) for W, b in self.layers])

    @classmethod
    def unflatten(cls, spec: MlpSpec, theta) -> "ParameterSet":
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (spec.n_params,):
            raise ValueError(f"expected {spec.n_params} parameters, got {theta.shape}")
        layers, k = [], 0
        for ws, bs in spec.shapes:
            nw = ws[0] * ws[1]
            layers.append((theta[k:k + nw].reshape(ws).copy(), theta[k + nw:k + nw + bs[0]].copy()))
            k += nw + bs[0]
        return cls(spec, layers)

    @classmethod
    def zeros(cls, spec: MlpSpec) -> "ParameterSet":
        return cls.unflatten(spec, np.zeros(spec.n_params))


def init_params(spec: MlpSpec, rng: np.random.Generator) -> ParameterSet:
    """Glorot-uniform weights, zero biases."""
    layers = []
    for (fi, fo), bs in spec.shapes:
        lim = np.sqrt(6.0 / (fi + fo))
        layers.append((rng.uniform(-lim, lim, size=(fi, fo)), np.zeros(bs)))
    return ParameterSet(spec, layers)


# -- activation helpers -----------------------------------------------------------

def act_hardswish(x):
    x = np.asarray(x, dtype=float)
    out = ad._hardswish(x)
    return float(out) if out.ndim == 0 else out


def act_leaky_relu(x, alpha: float = 0.2):
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0, x, alpha * x)
    return float(out) if out.ndim == 0 else out


def _act(spec: MlpSpec, a: Var) -> Var:
    if spec.activation == "hardswish":
        return ad.hardswish(a)
    if spec.activation == "leaky_relu":
        return ad.leaky_relu(a, spec.alpha)
    return a


def _act_d(spec: MlpSpec, a: Var) -> Var | None:
    if spec.activation == "hardswish":
        return ad.hardswish_d(a)
    if spec.activation == "leaky_relu":
        return ad.leaky_relu_d(a, spec.alpha)
    return None


def param_vars(params: ParameterSet) -> list[tuple[Var, Var]]:
    return [(Var(W, name=f"W{i}"), Var(b, name=f"b{i}")) for i, (W, b) in enumerate(params.layers)]


def _check_input(spec: MlpSpec, x) -> np.ndarray:
    x = np.asarray(x.value if isinstance(x, Var) else x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"input of shape {x.shape} does not match input_dim={spec.input_dim}")
    return x


# -- evaluation ---------------------------------------------------------------------

def forward(params: ParameterSet, x) -> np.ndarray:
    """Plain numpy evaluation; a single input vector returns a single output vector."""
    spec = params.spec
    single = np.ndim(x) == 1
    h = _check_input(spec, x)
    n_layers = len(params.layers)
    for i, (W, b) in enumerate(params.layers):
        a = h @ W + b
        if i == n_layers - 1:
            h = a
        elif spec.activation == "hardswish":
            h = ad._hardswish(a)
        elif spec.activation == "leaky_relu":
            h = np.where(a > 0, a, spec.alpha * a)
        else:
            h = a
    return h[0] if single else h


def forward_var(spec: MlpSpec, pvars, x) -> Var:
    """Graph-building evaluation; ``x`` may itself be a ``Var``."""
    if not isinstance(x, Var):
        x = Var(_check_input(spec, x))
    elif x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ValueError(f"input of shape {x.shape} does not match input_dim={spec.input_dim}")
    h = x
    last = len(pvars) - 1
    for i, (W, b) in enumerate(pvars):
        a = h @ W + b
        h = a if i == last else _act(spec, a)
    return h


def forward_jac(spec: MlpSpec, pvars, x) -> tuple[Var, Var]:
    """Outputs ``(n, d_out)`` and input Jacobian ``(n, d_out, d_in)``, both as graph nodes.

    ``x`` may be a ``Var`` (e.g. a gradient-penalty mixture); the Jacobian is
    still taken with respect to ``x`` treated as the independent variable.
    """
    if not isinstance(x, Var):
        x = Var(_check_input(spec, x))
    n, d_in = x.shape
    # one tangent per input direction: T[j] = d h / d x_j, shape (d_in, n, width)
    T: Var | np.ndarray = np.broadcast_to(np.eye(d_in)[:, None, :], (d_in, n, d_in))
    h = x
    last = len(pvars) - 1
    for i, (W, b) in enumerate(pvars):
        a = h @ W + b
        if isinstance(T, Var):
            Ta = T @ W
        else:
            # first layer: the tangent of x_j is the j-th row of W for every sample
            Ta = ad.reshape(W, (d_in, 1, W.shape[1])) * np.ones((1, n, 1))
        if i == last:
            h, T = a, Ta
        else:
            d = _act_d(spec, a)
            h = _act(spec, a)
            T = Ta if d is None else Ta * d
    J = ad.transpose(T, (1, 2, 0))
    return h, J


def input_jacobian(params: ParameterSet, x) -> np.ndarray:
    """``dy_i/dx_j`` at a single point (``(d_out, d_in)``) or batch (``(n, d_out, d_in)``)."""
    single = np.ndim(x) == 1
    _, J = forward_jac(params.spec, param_vars(params), x)
    return J.value[0] if single else J.value


def loss_gradient(loss: Callable, params: ParameterSet) -> tuple[float, np.ndarray]:
    """Value and flat parameter gradient of ``loss(spec, pvars) -> scalar Var``.

    The loss may use :func:`forward_var` outputs, :func:`forward_jac`
    Jacobians and functions of them (norms, penalties) built from
    :mod:`ddgan.autodiff` primitives.
    """
    pvars = param_vars(params)
    out = loss(params.spec, pvars)
    if not isinstance(out, Var):
        raise UnsupportedOperationError(
            f"loss returned {type(out).__name__}; it must be built from autodiff primitives"
        )
    flat = [v for pair in pvars for v in pair]
    grads = ad.grad(out, flat)
    return float(out.value), np.concatenate([g.ravel() for g in grads])


# -- checkpoints ------------------------------------------------------------------

CKPT_MAGIC = b"DDGANCK\0"
_CK_HEAD = struct.Struct("<8sII")


def save_checkpoint(path, nets: dict[str, ParameterSet], seed: int | None = None, epoch: int = 0,
                    extra: dict | None = None) -> None:
    """Write named parameter sets as ``magic | version | header_len | json header | f64 params``."""
    Path(path).write_bytes(checkpoint_bytes(nets, seed, epoch, extra))


def checkpoint_bytes(nets: dict[str, ParameterSet], seed=None, epoch: int = 0, extra=None) -> bytes:
    header = {
        "seed": seed,
        "epoch": epoch,
        "nets": [{"name": k, "spec": asdict(p.spec)} for k, p in nets.items()],
        "extra": extra or {},
    }
    hb = json.dumps(header, sort_keys=True).encode()
    body = b"".join(p.flatten().astype("<f8").tobytes() for p in nets.values())
    return _CK_HEAD.pack(CKPT_MAGIC, 1, len(hb)) + hb + body


class CheckpointError(IOError):
    pass


def load_checkpoint(path) -> tuple[dict[str, ParameterSet], dict]:
    blob = Path(path).read_bytes()
    if len(blob) < _CK_HEAD.size or blob[:8] != CKPT_MAGIC:
        raise CheckpointError(f"{path} is not a checkpoint")
    _, version, hlen = _CK_HEAD.unpack_from(blob)
    if version != 1:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(blob[_CK_HEAD.size:_CK_HEAD.size + hlen])
    except ValueError as exc:
        raise CheckpointError("corrupt checkpoint header") from exc
    theta = np.frombuffer(blob[_CK_HEAD.size + hlen:], dtype="<f8").astype(float)
    nets, k = {}, 0
    for entry in header["nets"]:
        spec = MlpSpec(**entry["spec"])
        if k + spec.n_params > len(theta):
            raise CheckpointError("checkpoint payload is truncated")
        nets[entry["name"]] = ParameterSet.unflatten(spec, theta[k:k + spec.n_params])
        k += spec.n_params
    if k != len(theta):
        raise CheckpointError("checkpoint payload size does not match its header")
    return nets, header


def forward_jac_numpy(params: ParameterSet, x) -> tuple[np.ndarray, np.ndarray]:
    """Graph-free counterpart of :func:`forward_jac` for evaluation only."""
    spec = params.spec
    h = _check_input(spec, x)
    n, d_in = h.shape
    T = None
    last = len(params.layers) - 1
    for i, (W, b) in enumerate(params.layers):
        a = h @ W + b
        Ta = np.broadcast_to(W[:, None, :], (d_in, n, W.shape[1])) if T is None else T @ W
        if i == last:
            h, T = a, Ta
        elif spec.activation == "hardswish":
            h, T = ad._hardswish(a), Ta * ad._hardswish_d(a)
        elif spec.activation == "leaky_relu":
            slope = np.where(a > 0, 1.0, spec.alpha)
            h, T = a * slope, Ta * slope
        else:
            h, T = a, Ta
    return h, np.transpose(T, (1, 2, 0))

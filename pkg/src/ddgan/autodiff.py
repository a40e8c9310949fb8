"""Minimal reverse-mode automatic differentiation over numpy arrays.

A :class:`Var` wraps an array and records how it was computed. Calling
:func:`grad` on a scalar ``Var`` sweeps the recorded graph backwards.

Second-order quantities (losses containing input Jacobians or gradient
norms) are obtained without reverse-over-reverse: input tangents are pushed
forward *as graph operations* (see :mod:`ddgan.mlp`), which makes every
Jacobian entry an ordinary differentiable ``Var``. For that to work each
activation ships its derivative as a differentiable primitive too.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np


class UnsupportedOperationError(TypeError):
    """An operation the engine cannot differentiate through."""


class Var:
    __slots__ = ("value", "_parents", "_backward", "name")

    def __init__(self, value, parents: Sequence["Var"] = (), backward: Callable | None = None,
                 name: str | None = None):
        self.value = np.asarray(value, dtype=float)
        self._parents = tuple(parents)
        self._backward = backward
        self.name = name

    # makes ``ndarray <op> Var`` defer to the Var's reflected operator and
    # makes numpy ufuncs (np.exp(var), ...) raise instead of building object arrays
    __array_ufunc__ = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def __len__(self):
        return len(self.value)

    def __repr__(self):
        return f"Var(shape={self.value.shape}{', ' + self.name if self.name else ''})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(as_var(other)))

    def __rsub__(self, other):
        return add(as_var(other), neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return mul(self, reciprocal(other))
        return mul(self, 1.0 / np.asarray(other, dtype=float))

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(as_var(other), self)

    def __pow__(self, k):
        if k == 2:
            return square(self)
        raise UnsupportedOperationError("only squaring is supported as a power")

    def __getitem__(self, key):
        return getitem(self, key)

    @property
    def T(self):
        return transpose(self)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- primitives --------------------------------------------------------------

def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(a.value + b.value, (a, b),
               lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def neg(a: Var) -> Var:
    return Var(-a.value, (a,), lambda g: (-g,))


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    return Var(av * bv, (a, b),
               lambda g: (_unbroadcast(g * bv, a.shape), _unbroadcast(g * av, b.shape)))


def reciprocal(a: Var) -> Var:
    r = 1.0 / a.value
    return Var(r, (a,), lambda g: (-g * r * r,))


def matmul(a, b) -> Var:
    """``a @ b`` for ``b`` two-dimensional; ``a`` may carry leading batch axes."""
    a, b = as_var(a), as_var(b)
    if b.ndim != 2:
        raise UnsupportedOperationError("matmul supports a 2D right operand only")
    av, bv = a.value, b.value

    def back(g):
        ga = g @ bv.T
        gb = av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb

    return Var(av @ bv, (a, b), back)


def square(a: Var) -> Var:
    av = a.value
    return Var(av * av, (a,), lambda g: (2.0 * g * av,))


def sqrt(a: Var, eps: float = 0.0) -> Var:
    """``sqrt(a + eps)``; ``eps`` guards the derivative at zero."""
    s = np.sqrt(a.value + eps)
    return Var(s, (a,), lambda g: (g * 0.5 / s,))


def log(a: Var) -> Var:
    av = a.value
    return Var(np.log(av), (a,), lambda g: (g / av,))


def sigmoid(a: Var) -> Var:
    s = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Var(s, (a,), lambda g: (g * s * (1.0 - s),))


def clip(a: Var, lo: float, hi: float) -> Var:
    av = a.value
    inside = (av >= lo) & (av <= hi)
    return Var(np.clip(av, lo, hi), (a,), lambda g: (g * inside,))


def sum(a: Var, axis=None) -> Var:  # noqa: A001 - mirrors numpy
    shape = a.shape

    def back(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return Var(a.value.sum(axis=axis), (a,), back)


def mean(a: Var, axis=None) -> Var:
    n = a.value.size if axis is None else a.shape[axis]
    return sum(a, axis=axis) * (1.0 / n)


def getitem(a: Var, key) -> Var:
    shape = a.shape

    def back(g):
        out = np.zeros(shape)
        np.add.at(out, key, g)
        return (out,)

    return Var(a.value[key], (a,), back)


def transpose(a: Var, axes=None) -> Var:
    inv = None if axes is None else np.argsort(axes)
    return Var(np.transpose(a.value, axes), (a,), lambda g: (np.transpose(g, inv),))


def stack(items: Sequence, axis: int = 0) -> Var:
    items = [as_var(x) for x in items]

    def back(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(items)))

    return Var(np.stack([x.value for x in items], axis=axis), items, back)


def concat(items: Sequence, axis: int = 0) -> Var:
    items = [as_var(x) for x in items]
    bounds = np.cumsum([x.shape[axis] for x in items])[:-1]

    def back(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Var(np.concatenate([x.value for x in items], axis=axis), items, back)


def reshape(a: Var, shape) -> Var:
    old = a.shape
    return Var(a.value.reshape(shape), (a,), lambda g: (g.reshape(old),))


# -- activations ---------------------------------------------------------------
# Each activation f comes with f' as a differentiable primitive, and f' with f''.

def _hardswish(x):
    return np.where(x <= -3.0, 0.0, np.where(x >= 3.0, x, (x * x + 3.0 * x) / 6.0))


def _hardswish_d(x):
    # kinks at +-3 take the quadratic branch
    return np.where(x < -3.0, 0.0, np.where(x > 3.0, 1.0, (2.0 * x + 3.0) / 6.0))


def _hardswish_dd(x):
    return np.where((x >= -3.0) & (x <= 3.0), 1.0 / 3.0, 0.0)


def hardswish(a: Var) -> Var:
    av = a.value
    return Var(_hardswish(av), (a,), lambda g: (g * _hardswish_d(av),))


def hardswish_d(a: Var) -> Var:
    av = a.value
    return Var(_hardswish_d(av), (a,), lambda g: (g * _hardswish_dd(av),))


def leaky_relu(a: Var, alpha: float = 0.2) -> Var:
    av = a.value
    slope = np.where(av > 0, 1.0, alpha)
    return Var(av * slope, (a,), lambda g: (g * slope,))


def leaky_relu_d(a: Var, alpha: float = 0.2) -> Var:
    # piecewise constant; derivative at exactly 0 is alpha
    av = a.value
    return Var(np.where(av > 0, 1.0, alpha), (a,), lambda g: (np.zeros_like(g),))


# -- reverse sweep ---------------------------------------------------------------

def _toposort(root: Var) -> list[Var]:
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, done = stack_.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack_.append((p, False))
    return order


def grad(out: Var, wrt: Iterable[Var]) -> list[np.ndarray]:
    """Gradients of the scalar ``out`` with respect to each of ``wrt``."""
    if not isinstance(out, Var):
        raise UnsupportedOperationError(f"loss must be a Var, got {type(out).__name__}")
    if out.value.size != 1:
        raise UnsupportedOperationError(f"loss must be scalar, got shape {out.shape}")
    wrt = list(wrt)
    keep = {id(w) for w in wrt}
    grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.value)}
    for node in reversed(_toposort(out)):
        g = grads.get(id(node)) if id(node) in keep else grads.pop(id(node), None)
        if g is None or node._backward is None:
            continue
        for p, gp in zip(node._parents, node._backward(g)):
            if id(p) in grads:
                grads[id(p)] = grads[id(p)] + gp
            else:
                grads[id(p)] = gp
    return [np.array(grads.get(id(w), np.zeros_like(w.value)), dtype=float).reshape(w.shape)
            for w in wrt]

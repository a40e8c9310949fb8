"""Strain/stress phase space in 2D Voigt notation and its energy metric.

Strains carry engineering shear (``g_xy = 2 eps_xy``), stresses carry
``s_xy`` directly, so that ``sigma = C @ eps`` holds componentwise for a
3x3 plane-strain stiffness ``C``.

The local squared distance between two states is

    d^2 = 1/2 de^T C de + 1/2 ds^T C^-1 ds

and :class:`MetricMatrix` also carries an upper-triangular factor ``r`` with
``r.T @ r = blockdiag(C/2, C^-1/2)`` so that ``|r z_a - r z_b|^2 = d^2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


class InvalidInputError(ValueError):
    """Raised for non-finite or mis-shaped phase-space input."""


class StrainVoigt(NamedTuple):
    e_xx: float
    e_yy: float
    g_xy: float


class StressVoigt(NamedTuple):
    s_xx: float
    s_yy: float
    s_xy: float


class PhaseState(NamedTuple):
    strain: StrainVoigt
    stress: StressVoigt

    def as_array(self) -> np.ndarray:
        return np.array([*self.strain, *self.stress], dtype=float)

    @classmethod
    def from_array(cls, z) -> "PhaseState":
        z = np.asarray(z, dtype=float)
        if z.shape != (6,):
            raise InvalidInputError(f"phase state needs 6 components, got shape {z.shape}")
        return cls(StrainVoigt(*map(float, z[:3])), StressVoigt(*map(float, z[3:])))


def _check_finite(z: np.ndarray, what: str = "phase state") -> None:
    if not np.all(np.isfinite(z)):
        raise InvalidInputError(f"non-finite {what} components")


@dataclass(frozen=True, eq=False)
class MetricMatrix:
    """Energy metric built from a symmetric positive-definite 3x3 matrix ``c``."""

    c: np.ndarray
    c_inv: np.ndarray = field(init=False, repr=False)
    r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.array(self.c, dtype=float)
        if c.shape != (3, 3):
            raise InvalidInputError(f"metric matrix must be 3x3, got {c.shape}")
        _check_finite(c, "metric")
        if not np.allclose(c, c.T, rtol=1e-14, atol=0.0):
            raise InvalidInputError("metric matrix is not symmetric")
        c = 0.5 * (c + c.T)
        try:
            np.linalg.cholesky(c)
        except np.linalg.LinAlgError as exc:
            raise InvalidInputError("metric matrix is not positive definite") from exc
        c_inv = np.linalg.inv(c)
        c_inv = 0.5 * (c_inv + c_inv.T)
        block = np.zeros((6, 6))
        block[:3, :3] = 0.5 * c
        block[3:, 3:] = 0.5 * c_inv
        r = np.linalg.cholesky(block).T
        for name, arr in (("c", c), ("c_inv", c_inv), ("r", r)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def block(self) -> np.ndarray:
        """``blockdiag(C/2, C^-1/2)``, the 6x6 quadratic form of the metric."""
        m = np.zeros((6, 6))
        m[:3, :3] = 0.5 * self.c
        m[3:, 3:] = 0.5 * self.c_inv
        return m


def _as_states(z) -> np.ndarray:
    if isinstance(z, PhaseState):
        return z.as_array()
    arr = np.asarray(z, dtype=float)
    if arr.shape[-1] != 6:
        raise InvalidInputError(f"phase states need 6 components, got shape {arr.shape}")
    return arr


def metric_sq_distance(a, b, m: MetricMatrix):
    """Squared energy distance between states ``a`` and ``b``.

    Accepts :class:`PhaseState` objects or arrays of shape ``(..., 6)``;
    batched input returns an array.
    """
    za, zb = _as_states(a), _as_states(b)
    _check_finite(za)
    _check_finite(zb)
    de = za[..., :3] - zb[..., :3]
    ds = za[..., 3:] - zb[..., 3:]
    out = 0.5 * np.einsum("...i,ij,...j->...", de, m.c, de)
    out = out + 0.5 * np.einsum("...i,ij,...j->...", ds, m.c_inv, ds)
    return float(out) if np.ndim(out) == 0 else out


def whiten(z, m: MetricMatrix) -> np.ndarray:
    """Map states to coordinates in which the energy metric is Euclidean."""
    arr = _as_states(z)
    _check_finite(arr)
    # explicit accumulation keeps each row's result independent of batch size
    # (BLAS blocking would not)
    out = np.zeros_like(arr)
    for k in range(6):
        out += arr[..., k, None] * m.r[:, k]
    return out


def unwhiten(w, m: MetricMatrix) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    return np.linalg.solve(m.r, w.T).T if w.ndim > 1 else np.linalg.solve(m.r, w)


def voigt_pack(u_grad) -> StrainVoigt:
    """Symmetric part of a 2x2 displacement gradient ``[[dux/dx, dux/dy], [duy/dx, duy/dy]]``."""
    g = np.asarray(u_grad, dtype=float)
    if g.shape != (2, 2):
        raise InvalidInputError(f"displacement gradient must be 2x2, got {g.shape}")
    return StrainVoigt(float(g[0, 0]), float(g[1, 1]), float(g[0, 1] + g[1, 0]))


def voigt_pack_batch(u_grad: np.ndarray) -> np.ndarray:
    """Vectorised :func:`voigt_pack` over gradients of shape ``(n, 2, 2)``."""
    g = np.asarray(u_grad, dtype=float)
    return np.stack([g[:, 0, 0], g[:, 1, 1], g[:, 0, 1] + g[:, 1, 0]], axis=1)

"""Nonlinear orthotropic plane-strain material and synthetic data generation.

The constitutive law is

    sigma = lam * g(tr eps) * I + mu * eps + C eps,
    g(x)  = ((|x| + a)**p - a**p) * sgn(x)

with ``C`` the orthotropic plane-strain stiffness assembled by
:func:`build_elasticity_matrix`. Default parameters are the benchmark values
E = 1e4 MPa, nu = 0.3, a = 0.001, p = 0.005.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .phase_space import InvalidInputError, MetricMatrix, StrainVoigt, StressVoigt


class MaterialError(ValueError):
    """Invalid material parameters or a non-SPD stiffness."""


class EmptyDatasetError(ValueError):
    pass


@dataclass(frozen=True)
class MaterialParams:
    E: float = 1.0e4
    nu: float = 0.3
    a: float = 0.001
    p: float = 0.005

    def __post_init__(self):
        if not self.E > 0:
            raise MaterialError(f"E must be positive, got {self.E}")
        # nu == 0.5 is let through so derive_constants can report the singular Lame constant
        if not 0 < self.nu <= 0.5:
            raise MaterialError(f"nu must lie in (0, 0.5), got {self.nu}")
        if not (self.a > 0 and self.p > 0):
            raise MaterialError("a and p must be positive")


@dataclass(frozen=True)
class DerivedConstants:
    lam: float
    mu: float
    lambda_bar: float
    C11: float
    G_perp: float
    G_par: float


def g_scalar(x, a: float, p: float):
    """Odd, monotone scalar nonlinearity applied to the volumetric strain."""
    x = np.asarray(x, dtype=float)
    out = ((np.abs(x) + a) ** p - a**p) * np.sign(x)
    return float(out) if out.ndim == 0 else out


def derive_constants(mp: MaterialParams) -> DerivedConstants:
    E, nu = mp.E, mp.nu
    if nu == 0.5:
        raise ZeroDivisionError("nu = 0.5 makes the Lame constant lambda singular")
    lam = E * nu / ((1 + nu) * (1 - 2 * nu))
    mu = E / (2 * (1 + nu))
    lambda_bar = (2 * nu**2 + 1) / (15 - 20 * nu**2) * E
    return DerivedConstants(
        lam=lam, mu=mu, lambda_bar=lambda_bar, C11=4.6875 * E, G_perp=0.3 * E, G_par=0.2 * E
    )


def build_elasticity_matrix(dc: DerivedConstants, nu: float) -> MetricMatrix:
    """Orthotropic plane-strain stiffness in Voigt form, wrapped as a metric."""
    off = 2 * nu * (dc.lambda_bar + dc.G_perp)
    c = np.array(
        [
            [dc.C11, off, 0.0],
            [off, dc.lambda_bar + 2 * dc.G_perp, 0.0],
            [0.0, 0.0, dc.G_par],
        ]
    )
    try:
        return MetricMatrix(c)
    except InvalidInputError as exc:
        raise MaterialError(f"elasticity matrix rejected: {exc}") from exc


def benchmark_metric(mp: MaterialParams | None = None) -> MetricMatrix:
    mp = mp or MaterialParams()
    return build_elasticity_matrix(derive_constants(mp), mp.nu)


def stress_from_strain_batch(eps: np.ndarray, mp: MaterialParams) -> np.ndarray:
    """Stresses for strains of shape ``(n, 3)`` (Voigt, engineering shear)."""
    eps = np.asarray(eps, dtype=float)
    dc = derive_constants(mp)
    c = build_elasticity_matrix(dc, mp.nu).c
    vol = dc.lam * g_scalar(eps[:, 0] + eps[:, 1], mp.a, mp.p)
    sig = eps @ c.T
    sig[:, 0] += vol + dc.mu * eps[:, 0]
    sig[:, 1] += vol + dc.mu * eps[:, 1]
    # mu multiplies the tensor shear eps_xy = g_xy / 2
    sig[:, 2] += 0.5 * dc.mu * eps[:, 2]
    return sig


def stress_from_strain(eps: StrainVoigt, mp: MaterialParams) -> StressVoigt:
    sig = stress_from_strain_batch(np.asarray(eps, dtype=float)[None, :], mp)[0]
    return StressVoigt(*map(float, sig))


# Each block of this many samples draws from its own Philox stream keyed by
# the seed with the block number in the high counter word; serial and
# blockwise-parallel generation therefore produce identical bytes.
RNG_BLOCK = 1 << 16


def _block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, block]))


def sample_strains(n: int, std: float, seed: int, start_block: int = 0, n_blocks: int | None = None):
    """i.i.d. ``N(0, std^2)`` Voigt strains of shape ``(n, 3)``.

    ``start_block``/``n_blocks`` select a sub-range of blocks so workers can
    generate disjoint slices of the same array.
    """
    if n < 1:
        raise EmptyDatasetError("dataset size must be at least 1")
    if not std > 0:
        raise MaterialError("standard deviation must be positive")
    total_blocks = -(-n // RNG_BLOCK)
    stop = total_blocks if n_blocks is None else min(total_blocks, start_block + n_blocks)
    parts = []
    for b in range(start_block, stop):
        size = min(RNG_BLOCK, n - b * RNG_BLOCK)
        parts.append(_block_rng(seed, b).standard_normal((size, 3)))
    return std * np.concatenate(parts, axis=0)


def synthesize_dataset(n: int, std: float = 0.005, seed: int = 0, mp: MaterialParams | None = None,
                       metric: MetricMatrix | None = None):
    """Synthetic material database: normal strains mapped through the model."""
    from .dataset import MaterialDatabase

    mp = mp or MaterialParams()
    eps = sample_strains(n, std, seed)
    sig = stress_from_strain_batch(eps, mp)
    states = np.concatenate([eps, sig], axis=1)
    return MaterialDatabase(states, metric or benchmark_metric(mp), seed=seed, params=mp)

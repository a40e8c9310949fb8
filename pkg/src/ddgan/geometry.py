"""Quarter plate with a circular hole: Sobol collocation, test and boundary points."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

# Joe & Kuo (new-joe-kuo-6.21201) primitive polynomials for dimensions 2..7:
# (degree s, coefficient bits a, initial direction integers m_1..m_s).
_JOE_KUO = [
    (1, 0, (1,)),
    (2, 1, (1, 3)),
    (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)),
    (4, 1, (1, 1, 3, 3)),
    (4, 4, (1, 3, 5, 13)),
]
_BITS = 32


def _direction_numbers(dim: int) -> np.ndarray:
    if not 1 <= dim <= len(_JOE_KUO) + 1:
        raise ValueError(f"Sobol generator supports 1..{len(_JOE_KUO) + 1} dimensions")
    v = np.zeros((dim, _BITS), dtype=np.uint64)
    v[0] = [1 << (_BITS - 1 - k) for k in range(_BITS)]
    for d in range(1, dim):
        s, a, m_init = _JOE_KUO[d - 1]
        m = list(m_init)
        for k in range(s, _BITS):
            new = m[k - s] ^ (m[k - s] << s)
            for j in range(1, s):
                if (a >> (s - 1 - j)) & 1:
                    new ^= m[k - j] << j
            m.append(new)
        v[d] = [m[k] << (_BITS - 1 - k) for k in range(_BITS)]
    return v


def sobol(n: int, dim: int = 2, skip: int = 0) -> np.ndarray:
    """Unscrambled Sobol points, Gray-code ordered, origin excluded.

    Row 0 of the result is the sequence element ``1 + skip``.
    """
    if n < 0 or skip < 0:
        raise ValueError("n and skip must be non-negative")
    v = _direction_numbers(dim)
    total = 1 + skip + n
    if total >= 1 << _BITS:
        raise ValueError("sequence exhausted")
    out = np.empty((n, dim), dtype=np.uint64)
    x = np.zeros(dim, dtype=np.uint64)
    for i in range(1, total):
        c = ((i - 1) ^ i).bit_length() - 1  # lowest zero bit of i-1
        x ^= v[:, c]
        if i > skip:
            out[i - 1 - skip] = x
    return out.astype(float) / float(1 << _BITS)


def sobol_2d(n: int, skip: int = 0) -> np.ndarray:
    return sobol(n, 2, skip)


@dataclass(frozen=True)
class QuarterPlate:
    """``[0, side]^2`` minus the disk of radius ``hole_radius`` at the origin."""

    side: float = 1.0
    hole_radius: float = 0.5

    def __post_init__(self):
        if not 0 < self.hole_radius < self.side:
            raise ValueError("hole radius must be positive and smaller than the side")

    def contains(self, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
        x, y = pts[..., 0], pts[..., 1]
        return ((x >= -tol) & (x <= self.side + tol) & (y >= -tol) & (y <= self.side + tol)
                & (x * x + y * y >= self.hole_radius**2 - tol))

    def strictly_inside(self, pts: np.ndarray) -> np.ndarray:
        x, y = pts[..., 0], pts[..., 1]
        return ((x >= 0) & (x <= self.side) & (y >= 0) & (y <= self.side)
                & (x * x + y * y > self.hole_radius**2))


@dataclass
class PointSets:
    interior: np.ndarray
    boundary: dict[str, np.ndarray] = field(default_factory=dict)
    normals: dict[str, np.ndarray] = field(default_factory=dict)


def _reject(plate: QuarterPlate, cand: np.ndarray) -> np.ndarray:
    return cand[plate.strictly_inside(cand)]


def sample_interior(n_target: int = 128**2, plate: QuarterPlate | None = None,
                    method: str = "sobol", seed: int = 0) -> np.ndarray:
    """First ``n_target`` candidates of the sequence that fall inside the plate."""
    plate = plate or QuarterPlate()
    if method == "sobol":
        pts, used = _sobol_accepted(n_target, plate)
        return pts
    if method == "uniform":
        return sample_test(n_target, seed=seed, plate=plate)
    raise ValueError(f"unknown sampling method {method!r}")


def _sobol_accepted(n_target: int, plate: QuarterPlate) -> tuple[np.ndarray, int]:
    accepted, used = [], 0
    have = 0
    chunk = max(64, int(n_target * 1.3))
    while have < n_target:
        cand = plate.side * sobol_2d(chunk, skip=used)
        inside = plate.strictly_inside(cand)
        need = n_target - have
        idx = np.flatnonzero(inside)
        if len(idx) >= need:
            used += int(idx[need - 1]) + 1
            accepted.append(cand[idx[:need]])
            have = n_target
        else:
            used += chunk
            accepted.append(cand[idx])
            have += len(idx)
    return np.concatenate(accepted, axis=0), used


def interior_acceptance(n_candidates: int, plate: QuarterPlate | None = None) -> float:
    """Fraction of the first ``n_candidates`` Sobol points accepted by the hole test."""
    plate = plate or QuarterPlate()
    cand = plate.side * sobol_2d(n_candidates)
    return float(plate.strictly_inside(cand).mean())


def sample_test(n: int = 256**2, seed: int = 0, plate: QuarterPlate | None = None) -> np.ndarray:
    """Seeded uniform points inside the plate (rejection sampling)."""
    plate = plate or QuarterPlate()
    rng = np.random.Generator(np.random.Philox(key=seed))
    parts, have = [], 0
    while have < n:
        cand = _reject(plate, plate.side * rng.random((max(64, int(1.3 * (n - have))), 2)))
        parts.append(cand)
        have += len(cand)
    return np.concatenate(parts, axis=0)[:n]


def sample_boundary(n_per_edge: int = 128, plate: QuarterPlate | None = None) -> PointSets:
    """Equispaced points per straight edge and equiangular points on the hole arc.

    Edges ``x0``/``y0`` are the symmetry lines (from the hole to the corner),
    ``x1``/``y1`` the outer edges, ``hole`` the quarter arc. Normals point out
    of the body.
    """
    plate = plate or QuarterPlate()
    if n_per_edge < 2:
        raise ValueError("need at least two points per edge")
    L, r = plate.side, plate.hole_radius
    t = np.linspace(0.0, 1.0, n_per_edge)
    s_sym = r + (L - r) * t
    theta = 0.5 * np.pi * t
    ones, zeros = np.ones(n_per_edge), np.zeros(n_per_edge)
    boundary = {
        "x0": np.stack([zeros, s_sym], axis=1),
        "y0": np.stack([s_sym, zeros], axis=1),
        "x1": np.stack([L * ones, L * t], axis=1),
        "y1": np.stack([L * t, L * ones], axis=1),
        "hole": np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1),
    }
    normals = {
        "x0": np.tile([-1.0, 0.0], (n_per_edge, 1)),
        "y0": np.tile([0.0, -1.0], (n_per_edge, 1)),
        "x1": np.tile([1.0, 0.0], (n_per_edge, 1)),
        "y1": np.tile([0.0, 1.0], (n_per_edge, 1)),
        "hole": -np.stack([np.cos(theta), np.sin(theta)], axis=1),
    }
    return PointSets(np.zeros((0, 2)), boundary, normals)


def dump_points(path, pts: PointSets) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "x", "y"])
        for p in pts.interior:
            w.writerow(["interior", repr(float(p[0])), repr(float(p[1]))])
        for name, arr in pts.boundary.items():
            for p in arr:
                w.writerow([name, repr(float(p[0])), repr(float(p[1]))])

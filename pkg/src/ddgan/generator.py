"""Physics-informed generator for the quarter plate with a hole.

Five scalar networks of ``(x, y)`` are wrapped in output transforms that
satisfy the hard boundary conditions for any parameters::

    u_x  = x * U * Nux
    u_y  = y * U * Nuy
    s_xx = x * t(y) + (L - x) * S * Nsxx
    s_yy = (L - y) * S * Nsyy
    s_xy = x * y * (x^2 + y^2 - r^2) * S * Nsxy

``U`` and ``S`` are fixed displacement and stress scales, ``L`` the plate
side and ``r`` the hole radius. Strains come from differentiating the
displacement transforms, so compatibility holds by construction. Boundary
conditions the transforms do not cover (outer-edge shear, traction on the
hole) enter the physics loss as soft residuals.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Var
from .geometry import PointSets, QuarterPlate
from .mlp import MlpSpec, ParameterSet, forward_jac, forward_jac_numpy, forward_var, init_params, param_vars
from .phase_space import StrainVoigt, StressVoigt

NET_NAMES = ("u_x", "u_y", "s_xx", "s_yy", "s_xy")
FIELD_COLUMNS = ("x", "y", "u_x", "u_y", "s_xx", "s_yy", "s_xy")


class DomainError(ValueError):
    pass


def traction(y, amplitude: float = 200.0, length: float = 2.0):
    """Load on the right edge, ``amplitude * cos(pi y / length)`` in MPa."""
    return amplitude * np.cos(np.pi * np.asarray(y, dtype=float) / length)


def traction_dy(y, amplitude: float = 200.0, length: float = 2.0):
    return -amplitude * np.pi / length * np.sin(np.pi * np.asarray(y, dtype=float) / length)


@dataclass
class Generator:
    params: dict[str, ParameterSet]
    plate: QuarterPlate = field(default_factory=QuarterPlate)
    traction_amplitude: float = 200.0
    displacement_scale: float = 1.0
    stress_scale: float = 200.0

    @classmethod
    def create(cls, rng: np.random.Generator, spec: MlpSpec | None = None, **kwargs) -> "Generator":
        spec = spec or MlpSpec(2, 1, 4, 64, "hardswish")
        return cls({name: init_params(spec, rng) for name in NET_NAMES}, **kwargs)

    @classmethod
    def zeros(cls, spec: MlpSpec | None = None, **kwargs) -> "Generator":
        spec = spec or MlpSpec(2, 1, 4, 64, "hardswish")
        return cls({name: ParameterSet.zeros(spec) for name in NET_NAMES}, **kwargs)

    @property
    def load_length(self) -> float:
        # the full plate spans twice the modelled quarter
        return 2.0 * self.plate.side

    def traction(self, y):
        return traction(y, self.traction_amplitude, self.load_length)

    def flatten(self) -> np.ndarray:
        return np.concatenate([self.params[k].flatten() for k in NET_NAMES])

    def with_flat(self, theta: np.ndarray) -> "Generator":
        out, k = {}, 0
        for name in NET_NAMES:
            spec = self.params[name].spec
            out[name] = ParameterSet.unflatten(spec, theta[k:k + spec.n_params])
            k += spec.n_params
        return Generator(out, self.plate, self.traction_amplitude, self.displacement_scale,
                         self.stress_scale)

    # -- numeric evaluation ---------------------------------------------------------

    def evaluate_batch(self, pts, chunk: int = 4096, check_domain: bool = True) -> dict[str, np.ndarray]:
        """Fields at points ``(n, 2)``: ``u (n,2)``, ``strain (n,3)``, ``stress (n,3)``, ``residual (n,2)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        if check_domain and not np.all(self.plate.contains(pts, tol=1e-12)):
            raise DomainError("evaluation point outside the quarter plate")
        parts = [self._eval_numpy(pts[s:s + chunk]) for s in range(0, len(pts), chunk)]
        if not parts:
            return {k: np.zeros((0, d)) for k, d in (("u", 2), ("strain", 3), ("stress", 3), ("residual", 2))}
        return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}

    def evaluate(self, x) -> "GeneratorOutput":
        f = self.evaluate_batch(np.asarray(x, dtype=float).reshape(1, 2))
        return GeneratorOutput(
            u=tuple(f["u"][0]),
            strain=StrainVoigt(*f["strain"][0]),
            stress=StressVoigt(*f["stress"][0]),
            equilibrium_residual=tuple(f["residual"][0]),
        )

    def _eval_numpy(self, pts: np.ndarray) -> dict[str, np.ndarray]:
        raw = {}
        for name in NET_NAMES:
            y, J = forward_jac_numpy(self.params[name], pts)
            raw[name] = (y[:, 0], J[:, 0, 0], J[:, 0, 1])
        return _assemble(pts, raw, self, np)


@dataclass(frozen=True)
class GeneratorOutput:
    u: tuple[float, float]
    strain: StrainVoigt
    stress: StressVoigt
    equilibrium_residual: tuple[float, float]


class _VarOps:
    """Adapter letting :func:`_assemble` run on graph nodes."""

    @staticmethod
    def stack(items, axis):
        return ad.stack(items, axis=axis)


def _assemble(pts, raw, gen: Generator, ops):
    """Apply the output transforms and their spatial derivatives.

    ``raw[name] = (N, dN/dx, dN/dy)`` per network; works on arrays or Vars.
    """
    x, y = pts[:, 0], pts[:, 1]
    L, r2 = gen.plate.side, gen.plate.hole_radius**2
    U, S = gen.displacement_scale, gen.stress_scale
    t = gen.traction(y)

    ux, ux_x, ux_y = raw["u_x"]
    uy, uy_x, uy_y = raw["u_y"]
    sxx, sxx_x, sxx_y = raw["s_xx"]
    syy, syy_x, syy_y = raw["s_yy"]
    sxy, sxy_x, sxy_y = raw["s_xy"]

    u_x = ux * (U * x)
    u_y = uy * (U * y)
    dux_dx = (ux + ux_x * x) * U
    dux_dy = ux_y * (U * x)
    duy_dx = uy_x * (U * y)
    duy_dy = (uy + uy_y * y) * U

    phi = x * y * (x * x + y * y - r2)
    phi_x = y * (3 * x * x + y * y - r2)
    phi_y = x * (x * x + 3 * y * y - r2)

    s_xx = sxx * (S * (L - x)) + x * t
    s_yy = syy * (S * (L - y))
    s_xy = sxy * (S * phi)
    dsxx_dx = (sxx_x * (L - x) - sxx) * S + t
    dsyy_dy = (syy_y * (L - y) - syy) * S
    dsxy_dx = (sxy * phi_x + sxy_x * phi) * S
    dsxy_dy = (sxy * phi_y + sxy_y * phi) * S
    # body force is zero for this benchmark
    r_x = dsxx_dx + dsxy_dy
    r_y = dsxy_dx + dsyy_dy

    return {
        "u": ops.stack([u_x, u_y], axis=1),
        "strain": ops.stack([dux_dx, duy_dy, dux_dy + duy_dx], axis=1),
        "stress": ops.stack([s_xx, s_yy, s_xy], axis=1),
        "residual": ops.stack([r_x, r_y], axis=1),
    }


def _raw_vars(gen: Generator, pvars: dict, pts: np.ndarray) -> dict:
    raw = {}
    for name in NET_NAMES:
        y, J = forward_jac(gen.params[name].spec, pvars[name], pts)
        raw[name] = (y[:, 0], J[:, 0, 0], J[:, 0, 1])
    return raw


def generator_vars(gen: Generator) -> dict[str, list[tuple[Var, Var]]]:
    return {name: param_vars(gen.params[name]) for name in NET_NAMES}


def flat_vars(pvars: dict) -> list[Var]:
    return [v for name in NET_NAMES for pair in pvars[name] for v in pair]


def fields_var(gen: Generator, pvars: dict, pts: np.ndarray) -> dict[str, Var]:
    """Graph-building version of :meth:`Generator.evaluate_batch` (no domain check)."""
    return _assemble(np.asarray(pts, dtype=float), _raw_vars(gen, pvars, pts), gen, _VarOps)


def _assemble_values(pts, raw, gen):
    x, y = pts[:, 0], pts[:, 1]
    L, r2 = gen.plate.side, gen.plate.hole_radius**2
    U, S = gen.displacement_scale, gen.stress_scale
    ux, uy, sxx, syy, sxy = (raw[k] for k in NET_NAMES)
    phi = x * y * (x * x + y * y - r2)
    return (ux * (U * x), uy * (U * y),
            sxx * (S * (L - x)) + x * gen.traction(y), syy * (S * (L - y)), sxy * (S * phi))


def edge_residuals(gen: Generator, name: str, pts, normals, u_x, u_y, s_xx, s_yy, s_xy) -> list:
    """Boundary residual components on one edge, in units of the field scales.

    Symmetry edges (``x0``, ``y0``) fix the normal displacement and the shear
    traction; the normal stress there is a reaction and stays free. The outer
    edges carry a full traction condition, the hole its normal traction.
    Works on arrays or Vars.
    """
    S, U = gen.stress_scale, gen.displacement_scale
    if name == "x0":
        return [u_x * (1.0 / U), s_xy * (1.0 / S)]
    if name == "y0":
        return [u_y * (1.0 / U), s_xy * (1.0 / S)]
    tx = s_xx * normals[:, 0] + s_xy * normals[:, 1]
    ty = s_xy * normals[:, 0] + s_yy * normals[:, 1]
    if name == "hole":
        # normal traction only: the shear transform already pins s_xy = 0 on the
        # arc, so the tangential component is not independently enforceable
        return [(tx * normals[:, 0] + ty * normals[:, 1]) * (1.0 / S)]
    if name == "x1":
        tx = tx - gen.traction(pts[:, 1])
    return [tx * (1.0 / S), ty * (1.0 / S)]


def physics_loss_var(gen: Generator, pvars: dict, interior: np.ndarray,
                     boundary: PointSets | None = None, fields: dict | None = None) -> tuple[Var, Var, Var]:
    """``(L_C, L_Omega, L_Gamma)`` as graph nodes.

    Residuals are measured in units of the stress scale per unit length.
    """
    interior = np.asarray(interior, dtype=float)
    if len(interior) == 0:
        raise ValueError("physics loss needs at least one interior point")
    f = fields if fields is not None else fields_var(gen, pvars, interior)
    R = f["residual"] * (1.0 / gen.stress_scale)
    l_omega = ad.mean(ad.sum(ad.square(R), axis=1))
    if boundary is None or not boundary.boundary:
        zero = Var(0.0)
        return l_omega + zero, l_omega, zero
    n_gamma = sum(len(p) for p in boundary.boundary.values())
    l_gamma = Var(0.0)
    for name, pts in boundary.boundary.items():
        if len(pts) == 0:
            continue
        raw = {k: forward_var(gen.params[k].spec, pvars[k], pts)[:, 0] for k in NET_NAMES}
        res = edge_residuals(gen, name, pts, boundary.normals[name], *_assemble_values(pts, raw, gen))
        for r in res:
            l_gamma = l_gamma + ad.sum(ad.square(r))
    l_gamma = l_gamma * (1.0 / n_gamma)
    return l_omega + l_gamma, l_omega, l_gamma


def physics_loss(gen: Generator, interior, boundary: PointSets | None = None,
                 with_grad: bool = False):
    """Physics loss value, optionally with the flat generator gradient."""
    pvars = generator_vars(gen)
    total, _, _ = physics_loss_var(gen, pvars, interior, boundary)
    if not with_grad:
        return float(total.value)
    grads = ad.grad(total, flat_vars(pvars))
    return float(total.value), np.concatenate([g.ravel() for g in grads])


def physics_loss_numpy(gen: Generator, interior, boundary: PointSets | None = None) -> float:
    """Graph-free evaluation of the physics loss, chunked for large point sets."""
    interior = np.asarray(interior, dtype=float).reshape(-1, 2)
    edges = list(boundary.boundary.items()) if boundary is not None else []
    # one pass over interior and boundary points together
    f = gen.evaluate_batch(np.concatenate([interior] + [p for _, p in edges]), check_domain=False)
    n = len(interior)
    R = f["residual"][:n] / gen.stress_scale
    l_omega = float(np.mean(np.sum(R * R, axis=1)))
    if not edges:
        return l_omega
    acc, start = 0.0, n
    for name, pts in edges:
        u, s = f["u"][start:start + len(pts)], f["stress"][start:start + len(pts)]
        res = edge_residuals(gen, name, pts, boundary.normals[name], *u.T, *s.T)
        acc += float(sum(np.sum(r * r) for r in res))
        start += len(pts)
    return l_omega + acc / (start - n)


def write_fields_csv(path, pts: np.ndarray, fields: dict[str, np.ndarray]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(FIELD_COLUMNS)
        rows = np.concatenate([pts, fields["u"], fields["stress"]], axis=1)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def read_fields_csv(path) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, :2], {"u": data[:, 2:4], "stress": data[:, 4:7]}

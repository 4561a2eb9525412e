"""Problem configuration, domain types and the grid (SBV) energy.

The energy being minimised is

    F(A, u) = int_{A \\ Omega} |grad u|^2 + h int_{dA} u^2 + C0 |A \\ Omega|

with ``u = 1`` on ``Omega``.  In the relaxed (SBV) form the surface term is
``h int_{S_u} (u_plus^2 + u_minus^2)``: an interface with positive
temperature on both sides is counted with both traces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import PreconditionError
from .grid import FaceSet, GridField, boundary_faces, face_differences


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise PreconditionError(f"disk radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def scale(self) -> float:
        return self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2.0 * math.pi * self.radius

    def contains(self, x, y):
        return (x - self.center[0]) ** 2 + (y - self.center[1]) ** 2 <= self.radius**2

    def bounding_box(self):
        cx, cy = self.center
        r = self.radius
        return cx - r, cx + r, cy - r, cy + r

    def radius_about(self, pole, theta):
        """Distance from ``pole`` (inside the disk) to the circle along each ray, with
        first and second derivatives in ``theta``."""
        px, py = pole[0] - self.center[0], pole[1] - self.center[1]
        if px * px + py * py >= self.radius**2:
            raise PreconditionError("pole must lie strictly inside the disk")
        c, s = np.cos(theta), np.sin(theta)
        q = px * c + py * s
        dq = -px * s + py * c
        disc = q * q - (px * px + py * py) + self.radius**2
        root = np.sqrt(disc)
        t = -q + root
        dt = -dq + q * dq / root
        ddt = q + (dq * dq - q * q) / root - (q * dq) ** 2 / root**3
        return t, dt, ddt


@dataclass(frozen=True)
class StarDomain:
    """Star-shaped Omega with boundary ``rho(theta) = a0 + sum a_k cos k theta + b_k sin k theta``."""

    center: tuple[float, float] = (0.0, 0.0)
    a0: float = 1.0
    a: tuple[float, ...] = ()
    b: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        if len(self.a) != len(self.b):
            raise PreconditionError("StarDomain needs as many sine as cosine coefficients")
        theta = np.linspace(0.0, 2 * np.pi, 2048, endpoint=False)
        if np.min(self._eval(theta)[0]) <= 0:
            raise PreconditionError("StarDomain radius function must be strictly positive")

    def _eval(self, theta):
        theta = np.asarray(theta, dtype=float)
        r = np.full_like(theta, self.a0)
        dr = np.zeros_like(theta)
        ddr = np.zeros_like(theta)
        for k, (ak, bk) in enumerate(zip(self.a, self.b), start=1):
            ck, sk = np.cos(k * theta), np.sin(k * theta)
            r += ak * ck + bk * sk
            dr += k * (-ak * sk + bk * ck)
            ddr -= k * k * (ak * ck + bk * sk)
        return r, dr, ddr

    @property
    def scale(self) -> float:
        return self.a0

    @property
    def area(self) -> float:
        return 0.5 * (2 * np.pi) * (self.a0**2 + 0.5 * sum(x * x for x in self.a + self.b))

    @property
    def perimeter(self) -> float:
        theta = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        r, dr, _ = self._eval(theta)
        return float(np.sum(np.hypot(r, dr)) * (2 * np.pi / theta.size))

    def contains(self, x, y):
        dx, dy = x - self.center[0], y - self.center[1]
        return np.hypot(dx, dy) <= self._eval(np.arctan2(dy, dx))[0]

    def bounding_box(self):
        theta = np.linspace(0.0, 2 * np.pi, 4096, endpoint=False)
        r = self._eval(theta)[0]
        x = self.center[0] + r * np.cos(theta)
        y = self.center[1] + r * np.sin(theta)
        return x.min(), x.max(), y.min(), y.max()

    def radius_about(self, pole, theta):
        if not np.allclose(pole, self.center, rtol=0, atol=1e-14):
            raise PreconditionError("StarDomain radius is only available about its own center")
        return self._eval(theta)


@dataclass(frozen=True, eq=False)
class GridMask:
    """Omega given as a 0/1 cell mask; only usable by the grid (SBV/phase-field) path."""

    mask: GridField

    def __post_init__(self):
        m = self.mask.values
        if not np.all((m == 0) | (m == 1)):
            raise PreconditionError("GridMask values must be 0 or 1")
        if not m.any():
            raise PreconditionError("GridMask is empty")
        from scipy import ndimage

        _, count = ndimage.label(m > 0.5)
        if count != 1:
            raise PreconditionError(f"GridMask must be connected, found {count} components")

    @property
    def scale(self) -> float:
        return math.sqrt(self.area / math.pi)

    @property
    def area(self) -> float:
        return float(self.mask.values.sum() * self.mask.cell_area)

    @property
    def perimeter(self) -> float:
        # axis-aligned face count of the pixel boundary
        padded = np.pad(self.mask.values > 0.5, 1)
        return boundary_faces(padded, (0, 0), self.mask.spacing).length

    @property
    def center(self):
        x, y = self.mask.centers()
        m = self.mask.values > 0.5
        return float(x[m].mean()), float(y[m].mean())

    def contains(self, x, y):
        g = self.mask
        i = np.floor((np.asarray(x) - g.origin[0]) / g.dx).astype(int)
        j = np.floor((np.asarray(y) - g.origin[1]) / g.dy).astype(int)
        inside = (i >= 0) & (i < g.nx) & (j >= 0) & (j < g.ny)
        out = np.zeros(np.shape(x), dtype=bool)
        out[inside] = g.values[j[inside], i[inside]] > 0.5
        return out

    def bounding_box(self):
        x, y = self.mask.centers()
        m = self.mask.values > 0.5
        hx, hy = 0.5 * self.mask.dx, 0.5 * self.mask.dy
        return x[m].min() - hx, x[m].max() + hx, y[m].min() - hy, y[m].max() + hy

    def radius_about(self, pole, theta):
        raise PreconditionError("a GridMask Omega cannot be used with the boundary-fitted solver")


@dataclass(frozen=True, eq=False)
class Union2:
    """Union of two Omega pieces (used for the shared-boundary experiment)."""

    first: "OmegaSpec"
    second: "OmegaSpec"

    @property
    def scale(self) -> float:
        return self.first.scale

    @property
    def area(self) -> float:
        return self.first.area + self.second.area

    @property
    def perimeter(self) -> float:
        return self.first.perimeter + self.second.perimeter

    def contains(self, x, y):
        return self.first.contains(x, y) | self.second.contains(x, y)

    def bounding_box(self):
        a, b = self.first.bounding_box(), self.second.bounding_box()
        return min(a[0], b[0]), max(a[1], b[1]), min(a[2], b[2]), max(a[3], b[3])

    def radius_about(self, pole, theta):
        raise PreconditionError("a disconnected Omega cannot be used with the boundary-fitted solver")


OmegaSpec = Union[Disk, StarDomain, GridMask, Union2]


@dataclass(frozen=True)
class ProblemConfig:
    dim: int = 2
    robin_h: float = 1.0
    volume_cost: float = 1.0
    omega: OmegaSpec = field(default_factory=Disk)
    allow_degenerate: bool = False

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise PreconditionError(f"dim must be 2 or 3, got {self.dim}")
        if self.robin_h < 0 or (self.robin_h == 0 and not self.allow_degenerate):
            raise PreconditionError(
                f"robin_h must be > 0 (set allow_degenerate for h = 0), got {self.robin_h}")
        if self.volume_cost < 0:
            raise PreconditionError(f"volume_cost must be >= 0, got {self.volume_cost}")

    @property
    def detached_energy(self) -> float:
        """Energy of the no-insulation competitor A = Omega."""
        return self.robin_h * self.omega.perimeter


@dataclass(frozen=True)
class EnergyBreakdown:
    dirichlet: float
    surface: float
    volume: float
    total: float

    @classmethod
    def of(cls, dirichlet, surface, volume) -> "EnergyBreakdown":
        d, s, v = float(dirichlet), float(surface), float(volume)
        for name, val in (("dirichlet", d), ("surface", s), ("volume", v)):
            if not val >= 0:
                raise PreconditionError(f"{name} energy must be non-negative, got {val}")
        return cls(d, s, v, d + s + v)

    def as_dict(self) -> dict:
        return {"total": self.total, "dirichlet": self.dirichlet,
                "surface": self.surface, "volume": self.volume}


@dataclass(frozen=True)
class SBVParams:
    jump_threshold: float = 0.3
    positivity_cut: float = 0.05

    def __post_init__(self):
        for name in ("jump_threshold", "positivity_cut"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise PreconditionError(f"{name} must lie in (0, 1), got {v}")


def omega_mask(omega: OmegaSpec, grid: GridField) -> np.ndarray:
    if isinstance(omega, GridMask):
        if not omega.mask.same_grid(grid):
            raise PreconditionError("GridMask Omega lives on a different grid than the field")
        return omega.mask.values > 0.5
    return np.asarray(omega.contains(*grid.centers()), dtype=bool)


def check_covers_omega(u: GridField, omega: OmegaSpec) -> np.ndarray:
    """Return Omega's cell mask after checking the grid covers it with a margin."""
    x0, x1, y0, y1 = u.extent
    bx0, bx1, by0, by1 = omega.bounding_box()
    if not (bx0 >= x0 + u.dx and bx1 <= x1 - u.dx and by0 >= y0 + u.dy and by1 <= y1 - u.dy):
        raise PreconditionError(
            f"grid extent {u.extent} does not cover Omega's bounding box "
            f"{(bx0, bx1, by0, by1)} with a one-cell margin")
    inside = omega_mask(omega, u)
    if not inside.any():
        raise PreconditionError("no grid cell centre falls inside Omega")
    return inside


def sbv_face_terms(values: np.ndarray, dx: float, dy: float, tau: float):
    """Dirichlet sum and (unweighted) squared-trace sum over the interior faces.

    Returns ``(dirichlet, trace_sum, jumps_vertical, jumps_horizontal)``.
    """
    dvx, dvy = face_differences(values)
    jx = np.abs(dvx) > tau
    jy = np.abs(dvy) > tau
    dirichlet = np.sum(dvx[~jx] ** 2) * (dy / dx) + np.sum(dvy[~jy] ** 2) * (dx / dy)
    sq = values**2
    tx = (sq[:, 1:] + sq[:, :-1])[jx]
    ty = (sq[1:, :] + sq[:-1, :])[jy]
    trace_sum = np.sum(tx) * dy + np.sum(ty) * dx
    return float(dirichlet), float(trace_sum), jx, jy


def jump_faces(u: GridField, tau: float) -> FaceSet:
    _, _, jx, jy = sbv_face_terms(u.values, u.dx, u.dy, tau)
    return FaceSet(jx, jy, u.origin, u.spacing)


def two_sided_faces(u: GridField, tau: float, positive_cut: float) -> FaceSet:
    """Jump faces with a positive trace on both sides (multiplicity-2 interfaces)."""
    j = jump_faces(u, tau)
    pos = u.values > positive_cut
    return FaceSet(j.vertical & pos[:, 1:] & pos[:, :-1],
                   j.horizontal & pos[1:, :] & pos[:-1, :], u.origin, u.spacing)


def energy_sbv(u: GridField, cfg: ProblemConfig, p: SBVParams = SBVParams()) -> EnergyBreakdown:
    """Discrete relaxed energy of a cell field.

    Faces whose adjacent values differ by more than ``p.jump_threshold`` are
    jump faces and contribute ``h (u_i^2 + u_j^2) * face_length``; every other
    face contributes its squared difference quotient to the Dirichlet term.
    Cells outside Omega with ``u > p.positivity_cut`` are counted in the volume.
    Faces on the outer grid boundary are not counted.
    """
    inside = check_covers_omega(u, cfg.omega)
    off = np.abs(u.values[inside] - 1.0)
    if off.size and off.max() > 1e-12:
        raise PreconditionError(f"cells inside Omega must hold 1 (max deviation {off.max():.3g})")
    dirichlet, trace_sum, _, _ = sbv_face_terms(u.values, u.dx, u.dy, p.jump_threshold)
    positive = (u.values > p.positivity_cut) & ~inside
    volume = cfg.volume_cost * float(positive.sum()) * u.cell_area
    return EnergyBreakdown.of(dirichlet, cfg.robin_h * trace_sum, volume)


def energy_sharp(state, shape, cfg: ProblemConfig) -> EnergyBreakdown:
    """Quadrature of the sharp energy on the boundary-fitted mesh of ``state``.

    Trapezoidal in the mapped radial coordinate and in angle; second order in
    the mesh width.
    """
    if not state.shape.same_as(shape):
        raise PreconditionError("state was solved on a different shape")
    if state.config != cfg:
        raise PreconditionError("state was solved with a different configuration")
    return EnergyBreakdown.of(state.dirichlet_integral(),
                              cfg.robin_h * state.trace_square_integral(),
                              cfg.volume_cost * state.insulator_area())


def energy_phase_field(u: GridField, z: GridField, eps: float, cfg: ProblemConfig, p=None):
    """Phase-field energy F_eps; see :func:`insulate.phase_field.energy_phase_field`."""
    from . import phase_field

    return phase_field.energy_phase_field(u, z, eps, cfg, p)

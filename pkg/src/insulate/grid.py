"""Uniform Cartesian cell grids and the face stencils shared by every grid energy.

Cell ``(j, i)`` (row ``j``, column ``i``) covers
``[x0 + i*dx, x0 + (i+1)*dx] x [y0 + j*dy, y0 + (j+1)*dy]``; values live at
cell centres.  ``values`` is stored as a ``(ny, nx)`` array, i.e. row-major
with x varying fastest.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import PreconditionError


@dataclass(frozen=True, eq=False)
class GridField:
    nx: int
    ny: int
    origin: tuple[float, float]
    spacing: tuple[float, float]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.ny, self.nx):
            vals = vals.reshape(self.ny, self.nx)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))
        object.__setattr__(self, "spacing", (float(self.spacing[0]), float(self.spacing[1])))
        if self.nx < 1 or self.ny < 1:
            raise PreconditionError(f"grid must have at least one cell, got {self.nx}x{self.ny}")
        if not (self.spacing[0] > 0 and self.spacing[1] > 0):
            raise PreconditionError(f"grid spacing must be positive, got {self.spacing}")
        if not np.all(np.isfinite(vals)):
            bad = np.argwhere(~np.isfinite(vals))[0]
            raise PreconditionError(f"non-finite grid value at row {bad[0]}, column {bad[1]}")

    @classmethod
    def from_function(cls, f, nx, ny, origin, spacing):
        x, y = cell_centers(nx, ny, origin, spacing)
        return cls(nx, ny, origin, spacing, f(x, y))

    @classmethod
    def square(cls, n, half_width, center=(0.0, 0.0), fill=0.0):
        """``n x n`` grid covering ``center +- half_width``."""
        d = 2.0 * half_width / n
        origin = (center[0] - half_width, center[1] - half_width)
        return cls(n, n, origin, (d, d), np.full((n, n), float(fill)))

    def with_values(self, values) -> "GridField":
        return GridField(self.nx, self.ny, self.origin, self.spacing, values)

    def same_grid(self, other: "GridField") -> bool:
        return (self.nx, self.ny, self.origin, self.spacing) == (
            other.nx, other.ny, other.origin, other.spacing)

    @property
    def dx(self) -> float:
        return self.spacing[0]

    @property
    def dy(self) -> float:
        return self.spacing[1]

    @property
    def cell_area(self) -> float:
        return self.spacing[0] * self.spacing[1]

    @property
    def extent(self) -> tuple[float, float, float, float]:
        x0, y0 = self.origin
        return x0, x0 + self.nx * self.dx, y0, y0 + self.ny * self.dy

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        return cell_centers(self.nx, self.ny, self.origin, self.spacing)


def cell_centers(nx, ny, origin, spacing):
    x = origin[0] + (np.arange(nx) + 0.5) * spacing[0]
    y = origin[1] + (np.arange(ny) + 0.5) * spacing[1]
    return np.meshgrid(x, y)


@dataclass(frozen=True, eq=False)
class FaceSet:
    """Boolean marks on the interior faces of a grid.

    ``vertical[j, i]`` is the face between cells ``(j, i)`` and ``(j, i+1)``
    (length ``dy``); ``horizontal[j, i]`` is the face between ``(j, i)`` and
    ``(j+1, i)`` (length ``dx``).
    """

    vertical: np.ndarray
    horizontal: np.ndarray
    origin: tuple[float, float]
    spacing: tuple[float, float]

    @property
    def length(self) -> float:
        dx, dy = self.spacing
        return float(self.vertical.sum() * dy + self.horizontal.sum() * dx)

    def midpoints(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Midpoints ``(x, y)`` of all marked faces and each face's length."""
        x0, y0 = self.origin
        dx, dy = self.spacing
        jv, iv = np.nonzero(self.vertical)
        jh, ih = np.nonzero(self.horizontal)
        x = np.concatenate([x0 + (iv + 1.0) * dx, x0 + (ih + 0.5) * dx])
        y = np.concatenate([y0 + (jv + 0.5) * dy, y0 + (jh + 1.0) * dy])
        lengths = np.concatenate([np.full(iv.size, dy), np.full(ih.size, dx)])
        return x, y, lengths

    def __or__(self, other: "FaceSet") -> "FaceSet":
        return FaceSet(self.vertical | other.vertical, self.horizontal | other.horizontal,
                       self.origin, self.spacing)

    def __and__(self, other: "FaceSet") -> "FaceSet":
        return FaceSet(self.vertical & other.vertical, self.horizontal & other.horizontal,
                       self.origin, self.spacing)

    def __sub__(self, other: "FaceSet") -> "FaceSet":
        return FaceSet(self.vertical & ~other.vertical, self.horizontal & ~other.horizontal,
                       self.origin, self.spacing)


def boundary_faces(mask: np.ndarray, origin, spacing) -> FaceSet:
    """Interior faces separating ``mask`` from its complement."""
    mask = np.asarray(mask, dtype=bool)
    return FaceSet(mask[:, 1:] != mask[:, :-1], mask[1:, :] != mask[:-1, :],
                   tuple(origin), tuple(spacing))


def face_differences(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Differences across vertical faces (along x) and horizontal faces (along y)."""
    return values[:, 1:] - values[:, :-1], values[1:, :] - values[:-1, :]


def face_average(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return 0.5 * (values[:, 1:] + values[:, :-1]), 0.5 * (values[1:, :] + values[:-1, :])


def difference_operator(nx: int, ny: int, dx: float, dy: float) -> sp.csr_matrix:
    """Sparse gradient ``G`` mapping flattened cell values to face derivatives.

    Rows are ordered vertical faces first (``ny*(nx-1)``, derivative along x)
    then horizontal faces (``(ny-1)*nx``, derivative along y), matching
    ``np.concatenate([dvx.ravel(), dvy.ravel()])`` of :func:`face_differences`
    divided by the spacing.
    """
    ex = sp.diags([-np.ones(nx - 1), np.ones(nx - 1)], [0, 1], shape=(nx - 1, nx)) / dx
    ey = sp.diags([-np.ones(ny - 1), np.ones(ny - 1)], [0, 1], shape=(ny - 1, ny)) / dy
    gx = sp.kron(sp.identity(ny), ex)
    gy = sp.kron(ey, sp.identity(nx))
    return sp.vstack([gx, gy]).tocsr()


def face_weights(nx: int, ny: int, dx: float, dy: float) -> np.ndarray:
    """Volume element attached to each face row of :func:`difference_operator`."""
    return np.full(ny * (nx - 1) + (ny - 1) * nx, dx * dy)


def face_to_cell_sum(nx: int, ny: int) -> sp.csr_matrix:
    """Incidence ``P`` with ``P.T @ face_quantity`` summing faces onto both adjacent cells."""
    ax = sp.diags([np.ones(nx - 1), np.ones(nx - 1)], [0, 1], shape=(nx - 1, nx))
    ay = sp.diags([np.ones(ny - 1), np.ones(ny - 1)], [0, 1], shape=(ny - 1, ny))
    return sp.vstack([sp.kron(sp.identity(ny), ax), sp.kron(ay, sp.identity(nx))]).tocsr()

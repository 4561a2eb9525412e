"""Numerical checks of the structural properties of minimisers on solver output.

Everything here is post-processing: lower bound of the positive phase,
density of the jump set, blow-up energy and flatness, the Euler-Lagrange
residual of a sharp optimum and the geometry of holes in the zero phase.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize_scalar
from scipy.spatial import cKDTree

from .errors import PreconditionError
from .grid import FaceSet, GridField, boundary_faces, face_differences
from .model import ProblemConfig
from .robin import StarShape, StateSolution


# ---------------------------------------------------------------- lower bound

@dataclass(frozen=True)
class LowerBoundReport:
    delta_obs: float            # min of u over {u > delta_cut}; nan if that set is empty
    gap_mass: float             # area fraction with u in (delta_cut, 0.9 delta_obs)
    halo_budget: float          # perimeter(A) * dx / domain area
    delta_p05: float            # 5th percentile of u over {u > delta_cut}
    gap_mass_p05: float         # area fraction with u in (delta_cut, 0.9 delta_p05)
    violation: bool


def check_lower_bound(u: GridField, delta_cut: float = 0.05) -> LowerBoundReport:
    """Observed lower bound of the positive phase.

    ``gap_mass`` as defined is zero whenever ``delta_obs`` exists (nothing in
    the positive phase lies below its minimum), so the report also carries a
    percentile-based variant that does detect a diffuse tail of small values.
    """
    v = u.values
    pos = v > delta_cut
    total = v.size
    dx = min(u.dx, u.dy)
    perim = boundary_faces(pos, u.origin, u.spacing).length
    budget = perim * dx / (total * u.cell_area)
    if not pos.any():
        return LowerBoundReport(float("nan"), 0.0, budget, float("nan"), 0.0, False)
    vals = v[pos]
    d_obs = float(vals.min())
    d05 = float(np.percentile(vals, 5))
    gap = float(np.count_nonzero(vals < 0.9 * d_obs)) / total
    gap05 = float(np.count_nonzero(vals < 0.9 * d05)) / total
    return LowerBoundReport(d_obs, gap, budget, d05, gap05,
                            violation=bool(gap > budget or gap05 > budget))


# ---------------------------------------------------------------- density

@dataclass
class DensityReport:
    entries: list = field(default_factory=list)    # (x, y, r, ratio)
    skipped: list = field(default_factory=list)    # (x, y, r, note)

    @property
    def ratios(self) -> np.ndarray:
        return np.array([e[3] for e in self.entries])

    @property
    def min_ratio(self) -> float:
        return float(self.ratios.min()) if self.entries else float("nan")

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max()) if self.entries else float("nan")


def face_length_in_ball(K: FaceSet, point, r: float) -> float:
    """Face-counted length of ``K`` inside ``B_r(point)`` (faces by midpoint)."""
    x, y, ln = K.midpoints()
    inside = (x - point[0]) ** 2 + (y - point[1]) ** 2 < r * r
    return float(ln[inside].sum())


def density_profile(K: FaceSet, points, radii) -> DensityReport:
    """Ratios ``length(K n B_r(x)) / r`` for every sample point and radius."""
    dx, dy = K.spacing
    x0, y0 = K.origin
    ny, nx = K.vertical.shape[0], K.horizontal.shape[1]
    x1, y1 = x0 + nx * dx, y0 + ny * dy
    rep = DensityReport()
    for px, py in np.atleast_2d(np.asarray(points, dtype=float)):
        for r in radii:
            r = float(r)
            if r < 4 * max(dx, dy):
                rep.skipped.append((px, py, r, "radius below 4 grid spacings"))
            elif px - r < x0 or px + r > x1 or py - r < y0 or py + r > y1:
                rep.skipped.append((px, py, r, "ball leaves the grid"))
            else:
                rep.entries.append((px, py, r, face_length_in_ball(K, (px, py), r) / r))
    return rep


# ---------------------------------------------------------------- blow-ups

@dataclass
class BlowupReport:
    point: tuple
    radii: np.ndarray
    e_r: np.ndarray
    flatness: np.ndarray
    classification: str          # flat-candidate | singular-candidate | unresolved
    energy_floor: float          # smallest observed e_r (the classifier never claims a constant)
    note: str = ""


def flatness(points: np.ndarray, center, r: float, n_directions: int = 8) -> float:
    """``inf_lines sup_{x in points n B_r} dist(x, line) / r``.

    For a unit normal ``n`` the best line has half-width
    ``(max n.x - min n.x) / 2``; the normal angle is seeded from
    ``n_directions`` samples and refined by a bounded scalar search.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    sel = pts[np.sum((pts - np.asarray(center)) ** 2, axis=1) < r * r]
    if sel.shape[0] < 2:
        return 0.0

    def width(phi):
        proj = sel @ np.array([np.cos(phi), np.sin(phi)])
        return 0.5 * (proj.max() - proj.min())

    step = np.pi / n_directions
    angles = np.arange(n_directions) * step
    k = int(np.argmin([width(a) for a in angles]))
    best = minimize_scalar(width, bounds=(angles[k] - step, angles[k] + step),
                           method="bounded", options={"xatol": 1e-10})
    return float(min(best.fun, width(angles[k])) / r)


def _grid_energy_and_K(u: GridField, tau: float):
    dvx, dvy = face_differences(u.values)
    jx, jy = np.abs(dvx) > tau, np.abs(dvy) > tau
    K = FaceSet(jx, jy, u.origin, u.spacing)
    dens_v = np.where(jx, 0.0, dvx**2) * (u.dy / u.dx)
    dens_h = np.where(jy, 0.0, dvy**2) * (u.dx / u.dy)
    x0, y0 = u.origin
    jv, iv = np.indices(dvx.shape)
    jh, ih = np.indices(dvy.shape)
    fx = np.concatenate([(x0 + (iv + 1.0) * u.dx).ravel(), (x0 + (ih + 0.5) * u.dx).ravel()])
    fy = np.concatenate([(y0 + (jv + 0.5) * u.dy).ravel(), (y0 + (jh + 1.0) * u.dy).ravel()])
    dens = np.concatenate([dens_v.ravel(), dens_h.ravel()])
    kx, ky, _ = K.midpoints()
    return fx, fy, dens, np.column_stack([kx, ky]), min(u.dx, u.dy)


def _state_energy_and_K(state: StateSolution, samples: int = 4096):
    X, Y = state.coordinates()
    dens = (state.gradient_squared() * state.quadrature_weights()).ravel()
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    r = state.shape.radius(theta)[0]
    cx, cy = state.shape.center
    K = np.column_stack([cx + r * np.cos(theta), cy + r * np.sin(theta)])
    h = min(state.ds * float(np.min(np.asarray(state.r_outer[0]) - np.asarray(state.rho[0]))),
            state.dtheta * float(np.min(state.rho[0])))
    return X.ravel(), Y.ravel(), dens, K, h


def blowup_scan(source, point, radii, *, eps_flat: float = 0.1, tau: float = 0.3,
                n_directions: int = 8, decay: float = 0.5,
                cfg: ProblemConfig | None = None) -> BlowupReport:
    """Scaled Dirichlet energy ``e_r = r^{-1} int_{B_r} |grad u|^2`` and flatness of K.

    ``source`` is a cell field (jump faces detected with threshold ``tau``
    carry no Dirichlet energy and form K) or a boundary-fitted
    :class:`StateSolution` (K is the outer boundary).

    The point is a flat candidate when ``e_r`` is non-increasing as ``r``
    shrinks, drops below ``decay`` times its value at the largest radius,
    and K is flat to ``eps_flat`` at the smallest radius.  Otherwise a
    positive energy floor makes it a singular candidate.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or np.any(np.diff(radii) >= 0):
        raise PreconditionError("radii must be a strictly decreasing sequence of length >= 2")
    if isinstance(source, StateSolution):
        x, y, dens, K, spacing = _state_energy_and_K(source)
        omega = source.config.omega
    elif isinstance(source, GridField):
        x, y, dens, K, spacing = _grid_energy_and_K(source, tau)
        omega = cfg.omega if cfg is not None else None
    else:
        raise PreconditionError("blowup_scan needs a GridField or a StateSolution")
    px, py = float(point[0]), float(point[1])
    if omega is not None:
        gx, gy = np.meshgrid(np.linspace(px - radii[0], px + radii[0], 101),
                             np.linspace(py - radii[0], py + radii[0], 101))
        in_ball = (gx - px) ** 2 + (gy - py) ** 2 <= radii[0] ** 2
        if np.any(omega.contains(gx[in_ball], gy[in_ball])):
            raise PreconditionError("the largest ball meets Omega")
    d2 = (x - px) ** 2 + (y - py) ** 2
    e_r = np.array([dens[d2 < r * r].sum() / r for r in radii])
    flat = np.array([flatness(K, (px, py), r, n_directions) for r in radii])
    floor = float(e_r.min())
    if radii[-1] < 2 * spacing:
        return BlowupReport((px, py), radii, e_r, flat, "unresolved", floor,
                            "smallest radius is below two grid spacings")
    scale = max(float(e_r.max()), 1e-300)
    non_increasing = bool(np.all(np.diff(e_r) <= 1e-9 * scale))
    decays = e_r[-1] <= decay * e_r[0] or e_r.max() <= 1e-14
    if non_increasing and decays and flat[-1] <= eps_flat:
        cls = "flat-candidate"
    elif floor > 1e-12:
        cls = "singular-candidate"
    else:
        cls = "unresolved"
    return BlowupReport((px, py), radii, e_r, flat, cls, floor)


def half_homogeneous_profile(x, y, center=(0.0, 0.0)):
    """``sqrt(rho) cos(phi / 2)`` about ``center``; its ``e_r`` equals ``pi / 2`` for every r."""
    dx, dy = x - center[0], y - center[1]
    return np.sqrt(np.hypot(dx, dy)) * np.cos(0.5 * np.arctan2(dy, dx))


# ---------------------------------------------------------------- Euler-Lagrange

def el_residual(state: StateSolution, shape: StarShape, cfg: ProblemConfig, *,
                converged: bool = True) -> float:
    """Sup norm of the first-variation density along the outer boundary."""
    from .shape_opt import stationarity_density

    if not converged:
        raise PreconditionError("refusing to evaluate the stationarity residual of a "
                                "non-converged shape")
    if not state.shape.same_as(shape) or state.config != cfg:
        raise PreconditionError("state was solved on a different shape or configuration")
    return float(np.max(np.abs(stationarity_density(state, shape, cfg))))


# ---------------------------------------------------------------- holes

@dataclass(frozen=True)
class HoleReport:
    area: float
    perimeter: float
    convexity_defect: float
    roundness: float
    separation_ratio: float
    skipped: bool = False
    note: str = ""


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _hull_vertices(points):
    """Andrew's monotone chain on integer points; counter-clockwise, no collinear vertices."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


def hull_row_extents(rows: dict) -> dict:
    """Lattice extent of the convex hull on every row.

    ``rows`` maps a row index to ``(first, last)`` occupied columns; the hull
    of a cell set equals the hull of these row end points.  Returns
    ``{row: (lo, hi)}`` with exact integer rounding.
    """
    verts = _hull_vertices([(r, c) for r, (lo, hi) in rows.items() for c in (lo, hi)])
    out = {}
    for r, c in verts:
        lo, hi = out.get(r, (c, c))
        out[r] = (min(lo, c), max(hi, c))
    m = len(verts)
    for k in range(m if m > 2 else m - 1):
        (r1, c1), (r2, c2) = verts[k], verts[(k + 1) % m]
        if r1 == r2:
            continue
        if r1 > r2:
            (r1, c1), (r2, c2) = (r2, c2), (r1, c1)
        den = r2 - r1
        for r in range(r1 + 1, r2):
            num = c1 * den + (c2 - c1) * (r - r1)
            # the row interval is [ceil(left crossing), floor(right crossing)],
            # so ceilings and floors are merged separately
            lo, hi = -((-num) // den), num // den
            old = out.get(r)
            out[r] = (lo, hi) if old is None else (min(old[0], lo), max(old[1], hi))
    return {r: (lo, hi) for r, (lo, hi) in out.items() if lo <= hi}


def _row_ends(mask: np.ndarray) -> dict:
    occupied = np.flatnonzero(mask.any(axis=1))
    first = mask.argmax(axis=1)
    last = mask.shape[1] - 1 - mask[:, ::-1].argmax(axis=1)
    return {int(r): (int(first[r]), int(last[r])) for r in occupied}


def digital_hull(mask: np.ndarray) -> np.ndarray:
    """Cells whose centres lie in the convex hull of the mask's cell centres."""
    mask = np.asarray(mask, dtype=bool)
    out = mask.copy()
    if mask.any():
        for r, (lo, hi) in hull_row_extents(_row_ends(mask)).items():
            out[r, lo:hi + 1] = True
    return out


def convexity_defect(mask: np.ndarray) -> float:
    """``|digital hull| / |mask| - 1`` (zero exactly for digitally convex masks)."""
    mask = np.asarray(mask, dtype=bool)
    count = int(mask.sum())
    if count == 0:
        raise PreconditionError("empty mask")
    ext = hull_row_extents(_row_ends(mask))
    return sum(hi - lo + 1 for lo, hi in ext.values()) / count - 1.0


def projection_width(mask: np.ndarray, dx: float, phi: float) -> float:
    """Width of the union of the mask's pixel squares along direction ``phi``."""
    pts = np.argwhere(mask)[:, ::-1] * dx           # (x, y) of cell corners' anchor
    n = np.array([np.cos(phi), np.sin(phi)])
    proj = pts @ n
    return float(proj.max() - proj.min() + dx * (abs(n[0]) + abs(n[1])))


def hole_geometry(masks, dx: float, K: FaceSet | None = None,
                  n_directions: int = 8) -> list[HoleReport]:
    """Per-hole convexity defect, roundness and separation from the rest of K.

    ``masks`` is a list of boolean arrays or an integer label array
    (0 = background).  Holes touching the array border are skipped.
    """
    if isinstance(masks, np.ndarray) and masks.dtype.kind in "iu":
        masks = [masks == k for k in range(1, int(masks.max()) + 1)]
    out = []
    for m in masks:
        m = np.asarray(m, dtype=bool)
        if not m.any():
            continue
        if m[0].any() or m[-1].any() or m[:, 0].any() or m[:, -1].any():
            out.append(HoleReport(float("nan"), float("nan"), float("nan"), float("nan"),
                                  float("nan"), skipped=True, note="hole touches the grid border"))
            continue
        count = int(m.sum())
        faces = boundary_faces(m, (0.0, 0.0), (dx, dx))
        perim = faces.length
        defect = convexity_defect(m)
        widths = [projection_width(m, dx, k * np.pi / n_directions) for k in range(n_directions)]
        roundness = min(widths) / perim
        sep = float("nan")
        if K is not None:
            rest = K - FaceSet(faces.vertical, faces.horizontal, K.origin, K.spacing)
            rx, ry, _ = rest.midpoints()
            hx, hy, _ = FaceSet(faces.vertical, faces.horizontal, K.origin, K.spacing).midpoints()
            if rx.size and hx.size:
                d, _ = cKDTree(np.column_stack([rx, ry])).query(np.column_stack([hx, hy]))
                sep = float(d.min()) / perim
        out.append(HoleReport(count * dx * dx, perim, defect, roundness, sep))
    return out

"""Ambrosio-Tortorelli relaxation of the insulation energy on a cell grid.

For a temperature field ``u`` and an edge indicator ``z`` the relaxed energy is

    F_eps(u, z) = sum_f w_f a_f (G u)_f^2
                + h [ eps sum_f w_f qbar_f (G z)_f^2 + sum_c |c| q_c (1 - z_c)^2 / (4 eps) ]
                + C0 sum_{c outside Omega} |c| sigma(u_c)

with ``a_f = (z_i^2 + z_j^2)/2 + k_eps`` on the face between cells ``i`` and
``j``, ``q = 2 u^2 + eta`` and ``sigma(u) = clamp(u / delta_cut, 0, 1)``.
Along a one-sided interface (u > 0 inside, u = 0 outside) the weight ``q``
vanishes on the outer half of the ridge in ``z``, so the ridge costs
``h * u^2`` per unit length, i.e. one trace.  A thin zero layer between two
positive phases costs both traces.

Minimisation alternates two steps, each of which cannot increase ``F_eps``:

* u-step: ``sigma`` is concave, so replacing it by its tangent at the
  current iterate gives a quadratic majorant in ``u``.  It is minimised
  exactly under ``u >= 0`` with a primal-dual active-set loop (the system
  matrix is an M-matrix, so the loop terminates and ``u <= 1`` holds).
* z-step: with ``u`` fixed the energy is quadratic in ``z``; one sparse
  solve gives the exact minimiser, which lies in ``[0, 1]``.

``eps`` is lowered along a schedule (continuation), and the classical pair
is recovered by :func:`extract_sets`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy import ndimage
from scipy.sparse.csgraph import connected_components

from .errors import PreconditionError, SolverError
from .grid import (FaceSet, GridField, difference_operator, face_to_cell_sum,
                   face_weights)
from .model import (Disk, EnergyBreakdown, ProblemConfig, SBVParams, Union2,
                    check_covers_omega, energy_sbv, jump_faces, two_sided_faces)
from .radial import optimize_radius, radial_profile

ETA = 1e-8


@dataclass(frozen=True)
class GridSpec:
    """Square ``n x n`` grid of half-width ``half_width`` around ``center``."""

    n: int = 128
    half_width: float = 2.2
    center: tuple[float, float] = (0.0, 0.0)

    def field(self, fill: float = 0.0) -> GridField:
        return GridField.square(self.n, self.half_width, self.center, fill)


@dataclass(frozen=True)
class PFParams:
    epsilon_schedule: tuple[float, ...] | None = None   # None: 8dx -> 2dx geometric
    n_stages: int = 4
    k_eps: float = 1e-6
    weight_form: str = "2u2"
    delta_cut: float = 0.05
    z_cut: float = 0.5
    jump_threshold: float = 0.1
    max_alternations: int = 40
    tol: float = 1e-7
    relaxation: float = 1.0
    init_noise: float = 0.0
    max_active_set_iter: int = 100

    def __post_init__(self):
        if self.weight_form != "2u2":
            raise PreconditionError(
                f"weight_form {self.weight_form!r} is not supported; only '2u2' is implemented")
        for name in ("delta_cut", "z_cut", "jump_threshold"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise PreconditionError(f"{name} must lie in (0, 1), got {v}")
        if self.k_eps <= 0:
            raise PreconditionError("k_eps must be positive")
        if not 0 < self.relaxation <= 1:
            raise PreconditionError("relaxation must lie in (0, 1]")
        if self.n_stages < 1 or self.max_alternations < 1:
            raise PreconditionError("n_stages and max_alternations must be >= 1")
        if self.epsilon_schedule is not None:
            eps = np.asarray(self.epsilon_schedule, dtype=float)
            if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
                raise PreconditionError("epsilon_schedule must be positive and strictly decreasing")

    def schedule(self, dx: float) -> tuple[float, ...]:
        if self.epsilon_schedule is None:
            if self.n_stages == 1:
                return (2.0 * dx,)
            return tuple(float(e) for e in np.geomspace(8.0 * dx, 2.0 * dx, self.n_stages))
        eps = tuple(float(e) for e in self.epsilon_schedule)
        if min(eps) < 2.0 * dx * (1 - 1e-12):
            raise PreconditionError(f"epsilon {min(eps)} is below the resolvable 2dx = {2 * dx}")
        return eps

    @property
    def sbv(self) -> SBVParams:
        return SBVParams(self.jump_threshold, self.delta_cut)


@dataclass
class StageTrace:
    eps: float
    energies: list = field(default_factory=list)     # EnergyBreakdown per alternation
    sbv: EnergyBreakdown | None = None
    alternations: int = 0
    converged: bool = False


@dataclass
class PhaseFieldResult:
    u: GridField
    z: GridField
    eps: float
    stages: list
    params: PFParams
    config: ProblemConfig
    A: np.ndarray | None = None
    K: np.ndarray | None = None

    @property
    def converged(self) -> bool:
        return all(s.converged for s in self.stages)

    @property
    def energy(self) -> EnergyBreakdown:
        return self.stages[-1].energies[-1]


@dataclass
class Extraction:
    """Classical pair recovered from a relaxed field."""

    A: np.ndarray              # insulator plus Omega, cell mask
    K: np.ndarray              # ridge cells {z < z_cut}
    u: GridField               # sharp temperature, 0 off A
    jumps: FaceSet             # jump faces of the sharp field
    two_sided: FaceSet         # jump faces with positive traces on both sides
    labels: np.ndarray         # components of A cut along jump faces (0 = zero phase)
    n_positive: int
    zero_labels: np.ndarray    # 4-connected components of the zero phase
    n_zero: int
    energy: EnergyBreakdown    # energy_sbv of the sharp field


class _Operators:
    """Sparse stencils shared by the energy and both minimisation steps."""

    def __init__(self, grid: GridField, cfg: ProblemConfig):
        self.grid = grid
        self.inside = check_covers_omega(grid, cfg.omega).ravel()
        self.G = difference_operator(grid.nx, grid.ny, grid.dx, grid.dy)
        self.P = face_to_cell_sum(grid.nx, grid.ny)
        self.w = face_weights(grid.nx, grid.ny, grid.dx, grid.dy)
        self.area = grid.cell_area

    def half_cell_sum(self, face_values):
        """``(1/2) sum_{f touching c} face_values_f`` for every cell ``c``."""
        return 0.5 * (self.P.T @ face_values)


def _sigma(u, delta):
    return np.clip(u / delta, 0.0, 1.0)


def _energy(ops: _Operators, u, z, eps, cfg: ProblemConfig, p: PFParams) -> EnergyBreakdown:
    gu = ops.G @ u
    gz = ops.G @ z
    a = 0.5 * (ops.P @ (z * z)) + p.k_eps
    dirichlet = float(np.sum(ops.w * a * gu * gu))
    q = 2.0 * u * u + ETA
    qbar = 0.5 * (ops.P @ q)
    surface = cfg.robin_h * (eps * float(np.sum(ops.w * qbar * gz * gz))
                             + ops.area * float(np.sum(q * (1.0 - z) ** 2)) / (4.0 * eps))
    volume = cfg.volume_cost * ops.area * float(np.sum(_sigma(u[~ops.inside], p.delta_cut)))
    return EnergyBreakdown.of(dirichlet, surface, volume)


def energy_phase_field(u: GridField, z: GridField, eps: float, cfg: ProblemConfig,
                       p: PFParams | None = None) -> EnergyBreakdown:
    """Relaxed energy ``F_eps`` with the stencils used by :func:`at_minimize`."""
    p = p or PFParams()
    if not u.same_grid(z):
        raise PreconditionError("u and z live on different grids")
    if z.values.min() < 0 or z.values.max() > 1:
        raise PreconditionError("z must take values in [0, 1]")
    if not eps > 0:
        raise PreconditionError("eps must be positive")
    ops = _Operators(u, cfg)
    return _energy(ops, u.values.ravel(), z.values.ravel(), eps, cfg, p)


def _active_set_solve(A: sp.csr_matrix, b: np.ndarray, u0: np.ndarray, max_iter: int):
    """Minimise ``u.A.u/2 - b.u`` subject to ``u >= 0`` (primal-dual active set)."""
    n = b.size
    active = (u0 <= 0) & (b - A @ u0 >= 0) & (b <= 0)
    diag = A.diagonal()
    for _ in range(max_iter):
        free = ~active
        u = np.zeros(n)
        if free.any():
            Aff = A[free][:, free].tocsc()
            u[free] = spla.spsolve(Aff, b[free])
        lam = A @ u - b
        lam[free] = 0.0
        new_active = (lam - diag * u) > 0
        if np.array_equal(new_active, active):
            return np.maximum(u, 0.0)
        active = new_active
    raise SolverError("active-set iteration for the u-step did not settle")


def _u_step(ops, u, z, eps, cfg, p):
    free = ~ops.inside
    gz = ops.G @ z
    a = 0.5 * (ops.P @ (z * z)) + p.k_eps
    L = (ops.G.T @ sp.diags(ops.w * a) @ ops.G).tocsr()
    m = 2.0 * cfg.robin_h * (eps * ops.half_cell_sum(ops.w * gz * gz)
                             + ops.area * (1.0 - z) ** 2 / (4.0 * eps))
    slope = np.where(u < p.delta_cut, 1.0 / p.delta_cut, 0.0)
    lin = cfg.volume_cost * ops.area * slope
    # stationarity: 2 (L + diag m) u + lin = 0 with u = 1 on Omega
    A = (L + sp.diags(m)).tocsr()
    Aff = A[free][:, free]
    rhs = -(A[free][:, ops.inside] @ np.ones(int(ops.inside.sum()))) - 0.5 * lin[free]
    out = np.ones_like(u)
    out[free] = _active_set_solve(Aff, rhs, u[free], p.max_active_set_iter)
    return np.minimum(out, 1.0)


def _z_step(ops, u, eps, cfg, p):
    gu = ops.G @ u
    d = ops.half_cell_sum(ops.w * gu * gu)
    q = 2.0 * u * u + ETA
    qbar = 0.5 * (ops.P @ q)
    h = cfg.robin_h
    src = h * ops.area * q / (4.0 * eps)
    A = sp.diags(d + src) + h * eps * (ops.G.T @ sp.diags(ops.w * qbar) @ ops.G)
    z = spla.spsolve(A.tocsc(), src)
    return np.clip(z, 0.0, 1.0)


def _initial_u(grid: GridField, cfg: ProblemConfig, p: PFParams, seed) -> np.ndarray:
    """Rasterised radial optimum about the (main) disk of Omega, plus optional noise."""
    omega = cfg.omega.first if isinstance(cfg.omega, Union2) else cfg.omega
    if isinstance(omega, Disk):
        center, rho0 = omega.center, omega.radius
    else:
        x0, x1, y0, y1 = omega.bounding_box()
        center = (0.5 * (x0 + x1), 0.5 * (y0 + y1))
        rho0 = float(np.sqrt(omega.area / np.pi))
    x, y = grid.centers()
    r = np.hypot(x - center[0], y - center[1])
    if cfg.robin_h == 0:
        u = np.ones_like(r)
    else:
        R, _, _ = optimize_radius(2, cfg.robin_h, cfg.volume_cost, rho0)
        u = radial_profile(2, cfg.robin_h, rho0, R).u(r)
    if p.init_noise > 0:
        rng = np.random.default_rng(seed)
        u = u + p.init_noise * rng.standard_normal(u.shape)
    u = np.clip(u, 0.0, 1.0).ravel()
    return u


def at_minimize(cfg: ProblemConfig, grid: GridSpec | GridField, p: PFParams | None = None,
                seed: int = 0, u0: GridField | None = None) -> PhaseFieldResult:
    """Alternating minimisation of ``F_eps`` with continuation in ``eps``."""
    p = p or PFParams()
    if cfg.dim != 2:
        raise PreconditionError("the phase-field solver is two-dimensional")
    g = grid.field() if isinstance(grid, GridSpec) else grid
    ops = _Operators(g, cfg)
    if u0 is not None:
        if not u0.same_grid(g):
            raise PreconditionError("initial field lives on a different grid")
        u = np.clip(u0.values.ravel().astype(float), 0.0, 1.0)
    else:
        u = _initial_u(g, cfg, p, seed)
    u[ops.inside] = 1.0
    stages = []
    z = np.ones_like(u)
    for eps in p.schedule(g.dx):
        stage = StageTrace(eps)
        z = _z_step(ops, u, eps, cfg, p)
        F = _energy(ops, u, z, eps, cfg, p)
        stage.energies.append(F)
        for it in range(p.max_alternations):
            omega_r = p.relaxation
            for _ in range(12):
                u_star = _u_step(ops, u, z, eps, cfg, p)
                u_new = u + omega_r * (u_star - u)
                z_new = _z_step(ops, u_new, eps, cfg, p)
                F_new = _energy(ops, u_new, z_new, eps, cfg, p)
                if F_new.total <= F.total * (1 + 1e-12) + 1e-300:
                    break
                omega_r *= 0.5
            else:
                raise SolverError(f"F_eps increased at eps = {eps:.4g} even with relaxation "
                                  f"{omega_r:.3g}", history=stage.energies)
            change = (F.total - F_new.total) / max(F.total, 1e-300)
            u, z, F = u_new, z_new, F_new
            stage.energies.append(F)
            stage.alternations = it + 1
            if change <= p.tol:
                stage.converged = True
                break
        res = PhaseFieldResult(g.with_values(u.reshape(g.ny, g.nx)),
                               g.with_values(z.reshape(g.ny, g.nx)), eps, stages, p, cfg)
        stage.sbv = extract_sets(res, p).energy
        stages.append(stage)
    result = PhaseFieldResult(g.with_values(u.reshape(g.ny, g.nx)),
                              g.with_values(z.reshape(g.ny, g.nx)), stages[-1].eps, stages, p, cfg)
    ext = extract_sets(result, p)
    result.A, result.K = ext.A, ext.K
    if not result.converged:
        warnings.warn("phase-field stages stopped at max_alternations before the "
                      "relative-change tolerance", RuntimeWarning, stacklevel=2)
    return result


def _cut_components(A: np.ndarray, jumps: FaceSet):
    """4-connected components of ``A`` where neighbours across a jump face are not linked."""
    ny, nx = A.shape
    idx = np.arange(nx * ny).reshape(ny, nx)
    link_v = A[:, 1:] & A[:, :-1] & ~jumps.vertical
    link_h = A[1:, :] & A[:-1, :] & ~jumps.horizontal
    rows = np.concatenate([idx[:, :-1][link_v], idx[:-1, :][link_h]])
    cols = np.concatenate([idx[:, 1:][link_v], idx[1:, :][link_h]])
    graph = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(nx * ny, nx * ny))
    _, lab = connected_components(graph, directed=False)
    lab = lab.reshape(ny, nx)
    labels = np.zeros((ny, nx), dtype=int)
    ids = np.unique(lab[A])
    for k, c in enumerate(ids, start=1):
        labels[(lab == c) & A] = k
    return labels, int(ids.size)


def extract_sets(result: PhaseFieldResult, p: PFParams | None = None) -> Extraction:
    """Recover the classical pair from a relaxed ``(u, z)``.

    Every ridge cell (``z < z_cut``) takes the value of the nearest cell off
    the ridge, which collapses the diffuse band onto its medial line: a
    one-sided ridge becomes a jump from the inner plateau to 0, and a thin
    zero layer between two positive phases becomes a jump with positive
    traces on both sides.  Then ``A = {u > delta_cut}`` (plus Omega) and the
    sharp ``u`` vanishes off ``A``.
    """
    p = p or result.params
    cfg = result.config
    u, z = result.u, result.z
    K = z.values < p.z_cut
    vals = u.values.copy()
    if K.any() and not K.all():
        _, (jj, ii) = ndimage.distance_transform_edt(K, return_indices=True)
        vals = vals[jj, ii]
    inside = check_covers_omega(u, cfg.omega)
    vals[inside] = 1.0
    A = vals > p.delta_cut
    if not A.any():
        raise SolverError("extracted insulator is empty")
    vals = np.where(A, vals, 0.0)
    sharp = u.with_values(vals)
    jumps = jump_faces(sharp, p.jump_threshold)
    two = two_sided_faces(sharp, p.jump_threshold, p.delta_cut)
    labels, n_pos = _cut_components(A, jumps)
    zero_labels, n_zero = ndimage.label(~A)
    energy = energy_sbv(sharp, cfg, p.sbv)
    return Extraction(A, K, sharp, jumps, two, labels, n_pos, zero_labels, int(n_zero), energy)

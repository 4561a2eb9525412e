"""Shape-gradient descent over Fourier insulators.

For a normal velocity ``V`` on dA the first variation of the reduced energy
``F(A) = min_u F(A, u)`` is ``dF[V] = int_dA g V ds`` with

    g = |grad_tau u|^2 - h^2 u^2 + h * kappa * u^2 + C0,

obtained from the Hadamard formulas for the bulk and surface terms with the
Robin condition ``du/dnu = -h u`` substituted (``kappa`` is the curvature of
dA, positive for convex shapes).  A radial displacement ``dr`` of the boundary
has normal velocity ``dr * r / sqrt(r^2 + r'^2)``, so the derivative with
respect to a Fourier coefficient is ``int g(theta) r(theta) phi_k(theta) dtheta``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .model import EnergyBreakdown, ProblemConfig, energy_sharp
from .robin import StarShape, StateSolution, check_admissible, default_gap, solve_state


@dataclass
class ShapeOptOptions:
    n_s: int = 32
    n_theta: int = 64
    modes: int = 8
    max_iter: int = 200
    tol: float = 1e-6
    gradient: str = "analytic"       # or "fd"
    armijo: float = 1e-4
    max_backtracks: int = 30
    initial_step: float = 0.1
    gap_min: float | None = None
    fd_step: float | None = None
    fd_fallback: bool = True         # switch to the discrete gradient when Armijo stalls


@dataclass
class OptResult:
    shape: StarShape
    energy: EnergyBreakdown
    trace: list = field(default_factory=list)      # (EnergyBreakdown, grad_norm) per iteration
    converged: bool = False
    stationarity_residual: float = float("nan")
    detached: bool = False
    tie: bool = False
    attached_shape: StarShape | None = None
    attached_energy: EnergyBreakdown | None = None
    message: str = ""


def _energy(shape, cfg, n_s, n_theta, gap_min=None) -> EnergyBreakdown:
    st = solve_state(shape, cfg, n_s, n_theta, gap_min=gap_min)
    return energy_sharp(st, shape, cfg)


def stationarity_density(state: StateSolution, shape: StarShape, cfg: ProblemConfig) -> np.ndarray:
    """Pointwise first-variation density ``g`` at the angular nodes of dA."""
    theta = state.theta
    u = state.trace_outer
    h = cfg.robin_h
    kappa = shape.curvature(theta)
    du_tau = state.tangential_trace_derivative()
    return du_tau**2 - h * h * u * u + h * kappa * u * u + cfg.volume_cost


def first_variation(state: StateSolution, shape: StarShape, cfg: ProblemConfig, V) -> float:
    """``dF[V] = int_dA g V ds`` for normal-velocity samples ``V`` at the angular nodes.

    With ``V = 1`` on a circle of radius R this is ``dF/dR`` (the ``2 pi R``
    arc length is inside the integral).
    """
    V = np.broadcast_to(np.asarray(V, dtype=float), (state.n_theta,))
    resolvable = state.n_theta // 4
    if shape.modes > resolvable:
        warnings.warn(f"{shape.modes} Fourier modes are not resolved by n_theta = "
                      f"{state.n_theta}; curvature is under-resolved", RuntimeWarning, stacklevel=2)
    g = stationarity_density(state, shape, cfg)
    r, dr, _ = state.r_outer
    return float(np.sum(g * V * np.hypot(r, dr)) * state.dtheta)


def coefficient_gradient(state: StateSolution, shape: StarShape, cfg: ProblemConfig) -> np.ndarray:
    """Analytic derivative of F with respect to ``shape.vector()``."""
    g = stationarity_density(state, shape, cfg)
    r = state.r_outer[0]
    return shape.basis(state.theta) @ (g * r) * state.dtheta


def normal_velocity(shape: StarShape, theta, direction) -> np.ndarray:
    """Normal velocity on dA induced by moving the coefficients along ``direction``."""
    r, dr, _ = shape.radius(theta)
    return (np.asarray(direction) @ shape.basis(theta)) * r / np.hypot(r, dr)


def _frozen_energy(state: StateSolution, shape: StarShape, cfg: ProblemConfig) -> float:
    """Energy of ``shape`` with the nodal values of ``state`` transported in (s, theta)."""
    from .robin import _geometry

    moved = StateSolution(shape, cfg, state.n_s, state.n_theta, state.u,
                          *_geometry(shape, cfg, state.theta), state.flux_inner)
    return energy_sharp(moved, shape, cfg).total


def shape_gradient_fd(shape: StarShape, cfg: ProblemConfig, n_s: int = 32, n_theta: int = 64,
                      step: float | None = None, frozen: bool = False, gap_min=None,
                      energy=None) -> np.ndarray:
    """Central-difference gradient of the discrete energy in each Fourier coefficient.

    Every probe re-solves the state.  With ``frozen=True`` the state of the
    unperturbed shape is transported instead (envelope check).  The step is
    chosen from a one-time curvature probe on ``a0`` unless given.
    """
    gap_min = default_gap(cfg) if gap_min is None else gap_min
    margin = check_admissible(shape, cfg, gap_min=0.0) - gap_min
    if energy is None:
        def energy(sh):
            return _energy(sh, cfg, n_s, n_theta, gap_min=0.0).total
    base = shape.vector()
    if frozen:
        st0 = solve_state(shape, cfg, n_s, n_theta, gap_min=0.0)

        def energy(sh):  # noqa: F811
            return _frozen_energy(st0, sh, cfg)

    scale = cfg.omega.scale
    if step is None:
        step = _probe_step(energy, base, shape.center, scale)
    step = min(step, 0.5 * margin) if margin > 0 else step
    if step <= 0 or margin < 2 * step:
        for _ in range(20):
            if margin >= 2 * step:
                break
            step *= 0.5
        else:
            raise PreconditionError(f"shape too close to the gap constraint for finite differences "
                                    f"(margin {margin:.3g})")
    grad = np.empty_like(base)
    for k in range(base.size):
        e = np.zeros_like(base)
        e[k] = step
        fp = energy(StarShape.from_vector(base + e, shape.center))
        fm = energy(StarShape.from_vector(base - e, shape.center))
        grad[k] = (fp - fm) / (2 * step)
    return grad


def _probe_step(energy, base, center, scale):
    """Step balancing truncation (F''' h^2) against rounding (eps F / h)."""
    h0 = 1e-2 * scale
    e = np.zeros_like(base)
    e[0] = h0
    f0 = energy(StarShape.from_vector(base, center))
    fp = energy(StarShape.from_vector(base + e, center))
    fm = energy(StarShape.from_vector(base - e, center))
    curv = abs(fp - 2 * f0 + fm) / h0**2
    eps = 1e-13 * max(abs(f0), 1.0)
    # third derivative is of the order of curvature / scale
    third = max(curv / scale, 1e-8)
    step = (3 * eps / third) ** (1.0 / 3.0)
    return float(np.clip(step, 1e-6 * scale, 1e-3 * scale))


def _project(vec, shape_center, cfg, gap_min, samples=1024):
    """Shift the mean radius so that ``r >= rho + gap_min`` on a fine sampling."""
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    sh = StarShape.from_vector(vec, shape_center)
    rho = cfg.omega.radius_about(shape_center, theta)[0]
    short = float(np.max(rho + gap_min - sh.radius(theta)[0]))
    out = vec.copy()
    if short > 0:
        out[0] += short * (1 + 1e-12) + 1e-15
    return out


def detached_shape(cfg: ProblemConfig, center, modes: int) -> StarShape | None:
    """The shape A = Omega as a Fourier shape, when Omega is a disk about ``center``."""
    from .model import Disk

    om = cfg.omega
    if isinstance(om, Disk) and om.center == tuple(center):
        return StarShape.circle(om.radius, center, modes)
    from .model import StarDomain

    if isinstance(om, StarDomain) and om.center == tuple(center):
        a = tuple(om.a[:modes]) + (0.0,) * max(0, modes - len(om.a))
        b = tuple(om.b[:modes]) + (0.0,) * max(0, modes - len(om.b))
        return StarShape(center, om.a0, a, b)
    return None


def optimize_shape(cfg: ProblemConfig, init: StarShape, opts: ShapeOptOptions | None = None,
                   callback=None) -> OptResult:
    """Projected, mode-preconditioned gradient descent with Armijo backtracking.

    The search direction is ``-g_k / (1 + k^2)`` on the Fourier coefficients.
    After the descent the detached competitor A = Omega (energy ``h |dOmega|``)
    is compared and the lower configuration is reported.
    """
    opts = opts or ShapeOptOptions()
    gap_min = default_gap(cfg) if opts.gap_min is None else opts.gap_min
    if init.modes < opts.modes:
        pad = (0.0,) * (opts.modes - init.modes)
        init = StarShape(init.center, init.a0, init.a + pad, init.b + pad)
    check_admissible(init, cfg, gap_min)
    center = init.center
    k = init.wavenumbers()
    precond = 1.0 / (1.0 + k * k)
    scale = cfg.omega.scale

    mode = {"gradient": opts.gradient}

    def evaluate(vec):
        sh = StarShape.from_vector(vec, center)
        st = solve_state(sh, cfg, opts.n_s, opts.n_theta, gap_min=gap_min)
        en = energy_sharp(st, sh, cfg)
        if mode["gradient"] == "fd":
            g = shape_gradient_fd(sh, cfg, opts.n_s, opts.n_theta, step=opts.fd_step,
                                  gap_min=gap_min)
        else:
            g = coefficient_gradient(st, sh, cfg)
        return sh, st, en, g

    x = init.vector()
    shape, state, en, g = evaluate(x)
    trace = []
    converged = False
    message = "max_iter reached"
    alpha = opts.initial_step * scale / max(np.max(np.abs(precond * g)), 1e-300)
    for it in range(opts.max_iter):
        d = -precond * g
        # projected-gradient stationarity measure
        x_probe = _project(x + d, center, cfg, gap_min)
        pg = x_probe - x
        gnorm = float(np.linalg.norm(pg))
        trace.append((en, gnorm))
        if callback is not None:
            callback(it, shape, en, gnorm)
        if gnorm <= opts.tol * max(en.total, 1.0) * scale:
            converged = True
            message = "gradient tolerance reached"
            break
        accepted = False
        for _ in range(opts.max_backtracks):
            x_new = _project(x + alpha * d, center, cfg, gap_min)
            try:
                cand = evaluate(x_new)
            except PreconditionError:
                alpha *= 0.5
                continue
            decrease = en.total - cand[2].total
            if decrease > 0 and decrease >= -opts.armijo * float(g @ (x_new - x)):
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            if mode["gradient"] == "analytic" and opts.fd_fallback:
                # The continuous shape gradient differs from the gradient of
                # the discrete energy at O(ds^2); once that error dominates,
                # finish with the gradient of the discrete energy itself.
                mode["gradient"] = "fd"
                shape, state, en, g = evaluate(x)
                alpha = opts.initial_step * scale / max(np.max(np.abs(precond * g)), 1e-300)
                continue
            message = "line search failed"
            break
        x = x_new
        shape, state, en, g = cand
        alpha *= 2.0
    else:
        d = -precond * g
        gnorm = float(np.linalg.norm(_project(x + d, center, cfg, gap_min) - x))
        trace.append((en, gnorm))

    g_density = stationarity_density(state, shape, cfg)
    result = OptResult(shape, en, trace, converged, float(np.max(np.abs(g_density))),
                       attached_shape=shape, attached_energy=en, message=message)

    detached = cfg.detached_energy
    gap = detached - en.total
    if abs(gap) <= 1e-9 * max(abs(detached), 1.0):
        result.tie = True
    elif gap < 0:
        dshape = detached_shape(cfg, center, opts.modes)
        result.detached = True
        result.shape = dshape if dshape is not None else shape
        result.energy = EnergyBreakdown.of(0.0, detached, 0.0)
        result.stationarity_residual = 0.0
    return result


def max_relative_radius_error(shape: StarShape, radius: float, samples: int = 1024) -> float:
    theta = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    return float(np.max(np.abs(shape.radius(theta)[0] - radius)) / radius)


def circle_with_mode(radius, k, amplitude, center=(0.0, 0.0), modes=8) -> StarShape:
    a = [0.0] * modes
    a[k - 1] = amplitude
    return StarShape(center, radius, tuple(a), (0.0,) * modes)


__all__ = [
    "OptResult", "ShapeOptOptions", "coefficient_gradient", "first_variation",
    "normal_velocity", "optimize_shape", "shape_gradient_fd", "stationarity_density",
    "max_relative_radius_error", "circle_with_mode", "detached_shape",
]

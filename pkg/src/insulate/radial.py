"""Closed-form radial solutions: Omega = B(rho0), A = B(R), concentric.

In two dimensions the harmonic profile is ``u(r) = 1 + c log(r/rho0)`` and the
Robin condition ``u'(R) + h u(R) = 0`` gives ``c = -h / (1/R + h log(R/rho0))``.
In three dimensions ``u(r) = a + b/r``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .model import EnergyBreakdown

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class NonAttainmentWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RadialSolution:
    n: int
    h: float
    rho0: float
    R: float
    c: float
    offset: float
    u_outer: float
    energy: EnergyBreakdown

    def u(self, r):
        """Temperature at radius ``r`` (1 inside Omega, 0 outside A)."""
        r = np.asarray(r, dtype=float)
        inner = r <= self.rho0
        outer = r > self.R
        if self.R == self.rho0:
            prof = np.ones_like(r)
        elif self.n == 2:
            prof = 1.0 + self.c * np.log(np.maximum(r, self.rho0) / self.rho0)
        else:
            prof = self.offset + self.c / np.maximum(r, self.rho0)
        return np.where(inner, 1.0, np.where(outer, 0.0, prof))

    def du(self, r):
        r = np.asarray(r, dtype=float)
        if self.n == 2:
            return self.c / r
        return -self.c / r**2

    @property
    def flux(self) -> float:
        """Heat flux through dOmega, ``int -du/dnu``."""
        if self.R == self.rho0:
            return 0.0
        if self.n == 2:
            return 2 * math.pi * abs(self.c)
        return 4 * math.pi * abs(self.c)

    def residuals(self) -> tuple[float, float]:
        """Relative (Dirichlet at rho0, Robin at R) residuals of the closed form."""
        if self.R == self.rho0:
            return 0.0, 0.0
        dirichlet = abs(float(self.u(self.rho0)) - 1.0)
        if self.n == 2:
            prof_R = 1.0 + self.c * math.log(self.R / self.rho0)
        else:
            prof_R = self.offset + self.c / self.R
        du_R = float(self.du(self.R))
        scale = abs(du_R) + self.h * abs(prof_R) + 1e-300
        return dirichlet, abs(du_R + self.h * prof_R) / max(scale, 1.0)


def _check(n, h, rho0, R):
    if n not in (2, 3):
        raise PreconditionError(f"dimension must be 2 or 3, got {n}")
    if not rho0 > 0:
        raise PreconditionError(f"rho0 must be positive, got {rho0}")
    if h < 0:
        raise PreconditionError(f"h must be non-negative, got {h}")
    if R < rho0:
        raise PreconditionError(f"outer radius {R} is smaller than rho0 = {rho0}")


def radial_profile(n: int, h: float, rho0: float, R: float, C0: float = 0.0) -> RadialSolution:
    _check(n, h, rho0, R)
    if R == rho0:
        # no insulator: the boundary of Omega itself carries the Robin loss
        surf = h * (2 * math.pi * rho0 if n == 2 else 4 * math.pi * rho0**2)
        return RadialSolution(n, h, rho0, R, 0.0, 1.0, 1.0, EnergyBreakdown.of(0.0, surf, 0.0))
    if n == 2:
        L = math.log(R / rho0)
        c = -h / (1.0 / R + h * L)
        offset = 1.0
        u_R = 1.0 + c * L
        dirichlet = 2 * math.pi * c * c * L
        surface = 2 * math.pi * R * h * u_R**2
        volume = C0 * math.pi * (R * R - rho0 * rho0)
    else:
        b = h / (1.0 / R**2 + h / rho0 - h / R)
        c = b
        offset = 1.0 - b / rho0
        u_R = offset + b / R
        dirichlet = 4 * math.pi * b * b * (1.0 / rho0 - 1.0 / R)
        surface = 4 * math.pi * R * R * h * u_R**2
        volume = C0 * 4.0 / 3.0 * math.pi * (R**3 - rho0**3)
    u_R = min(max(u_R, 0.0), 1.0)
    return RadialSolution(n, h, rho0, R, c, offset, u_R,
                          EnergyBreakdown.of(dirichlet, surface, volume))


def radial_energy(n: int, h: float, C0: float, rho0: float, R: float) -> EnergyBreakdown:
    return radial_profile(n, h, rho0, R, C0).energy


def radial_energy_derivative(n: int, h: float, C0: float, rho0: float, R: float) -> float:
    """Closed-form dF/dR (one-sided from the right at R = rho0)."""
    _check(n, h, rho0, R)
    if n == 2:
        u_R = 1.0 / (1.0 + h * R * math.log(R / rho0))
        return 2 * math.pi * (h * u_R**2 * (1.0 - h * R) + C0 * R)
    sol = radial_profile(3, h, rho0, R, C0) if R > rho0 else None
    u_R = sol.u_outer if sol is not None else 1.0
    # Hadamard density |grad_tau u|^2 - h^2 u^2 + h*kappa*u^2 + C0 with kappa = 2/R
    return 4 * math.pi * R * R * (u_R**2 * (2.0 * h / R - h * h) + C0)


def default_r_max(n: int, h: float, C0: float, rho0: float) -> float:
    f0 = radial_energy(n, h, C0, rho0, rho0).total
    return rho0 + 2.0 * (f0 / C0) ** (1.0 / n)


def golden_section(f, lo: float, hi: float, tol: float, max_iter: int = 500):
    """Minimise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    x1 = b - INV_PHI * (b - a)
    x2 = a + INV_PHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INV_PHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INV_PHI * (b - a)
            f2 = f(x2)
    x = 0.5 * (a + b)
    return x, f(x)


def optimize_radius(n: int, h: float, C0: float, rho0: float, r_max: float | None = None,
                    tol: float | None = None):
    """Best concentric insulator radius.

    Golden-section search brackets the minimiser; because the energy is flat
    to rounding error within ~sqrt(eps) of the minimiser, the bracket is then
    polished by bisection on the sign of the closed-form derivative.  The
    result is compared against the no-insulation radius ``R = rho0``.

    Returns ``(R_star, F_star, EnergyBreakdown)``.
    """
    _check(n, h, rho0, rho0)
    tol = 1e-10 * rho0 if tol is None else tol

    def F(R):
        return radial_energy(n, h, C0, rho0, R).total

    if h == 0:
        return rho0, 0.0, radial_energy(n, h, C0, rho0, rho0)
    if C0 == 0:
        R = r_max if r_max is not None else 1e3 * rho0
        warnings.warn("C0 = 0: the infimum is approached as R grows and need not be attained; "
                      f"returning R_max = {R}", NonAttainmentWarning, stacklevel=2)
        return R, F(R), radial_energy(n, h, C0, rho0, R)
    if r_max is None:
        r_max = default_r_max(n, h, C0, rho0)
    if r_max <= rho0:
        raise PreconditionError("r_max must exceed rho0")

    # coarse scan picks the bracket: F can have a local minimum at rho0 and
    # another one in the interior
    grid = np.linspace(rho0, r_max, 65)
    k = int(np.argmin([F(R) for R in grid]))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    x, _ = golden_section(F, a, b, tol=max(tol, 1e-6 * rho0))
    # polish on the derivative sign inside the golden-section bracket
    step = max(1e-5 * rho0, 4 * tol)
    lo, hi = max(rho0, x - step), min(r_max, x + step)
    dlo = radial_energy_derivative(n, h, C0, rho0, lo)
    dhi = radial_energy_derivative(n, h, C0, rho0, hi)
    if dlo < 0 < dhi:
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if radial_energy_derivative(n, h, C0, rho0, mid) < 0:
                lo = mid
            else:
                hi = mid
        x = 0.5 * (lo + hi)
    candidates = [(F(x), x), (F(rho0), rho0), (F(r_max), r_max)]
    F_star, R_star = min(candidates)
    R_star = float(R_star)
    return R_star, F_star, radial_energy(n, h, C0, rho0, R_star)

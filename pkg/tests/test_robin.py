import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from insulate.errors import PreconditionError, SolverError
from insulate.model import Disk, ProblemConfig, energy_sharp
from insulate.radial import radial_profile
from insulate.robin import FLUX_K, StarShape, check_admissible, energy_from_flux, solve_state

CFG = ProblemConfig(robin_h=4.0, volume_cost=1.0)
PERTURBED = StarShape((0.0, 0.0), 1.6, (0.08, -0.03, 0.01), (0.02, 0.04, 0.0))


coeffs = st.lists(st.floats(-0.1, 0.1), min_size=0, max_size=5)


@given(a0=st.floats(0.5, 3.0), a=coeffs, data=st.data())
def test_vector_round_trip(a0, a, data):
    b = data.draw(st.lists(st.floats(-0.1, 0.1), min_size=len(a), max_size=len(a)))
    s = StarShape((0.1, -0.2), a0, tuple(a), tuple(b))
    back = StarShape.from_vector(s.vector(), s.center)
    assert back.same_as(s)
    theta = np.linspace(0, 2 * np.pi, 11)
    assert np.allclose(s.vector() @ s.basis(theta), s.radius(theta)[0])


@given(R=st.floats(0.5, 5.0))
def test_circle_curvature_and_area(R):
    s = StarShape.circle(R, modes=3)
    assert np.allclose(s.curvature(np.linspace(0, 6, 9)), 1.0 / R)
    assert s.area() == pytest.approx(math.pi * R * R)


def test_shape_area_by_quadrature():
    theta = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    r = PERTURBED.radius(theta)[0]
    assert PERTURBED.area() == pytest.approx(0.5 * np.sum(r * r) * (2 * np.pi / 4096), rel=1e-12)


def test_admissibility_reports_location():
    with pytest.raises(PreconditionError, match="theta"):
        check_admissible(StarShape.circle(1.01), CFG)
    assert check_admissible(StarShape.circle(1.5), CFG) == pytest.approx(0.5)


def test_resolution_preconditions():
    with pytest.raises(PreconditionError):
        solve_state(StarShape.circle(2.0), CFG, 32, 63)
    with pytest.raises(PreconditionError):
        solve_state(StarShape.circle(2.0), ProblemConfig(dim=3), 32, 64)


def test_circle_matches_closed_form_at_second_order():
    errs = []
    for n in (16, 32, 64):
        st_ = solve_state(StarShape.circle(2.0), ProblemConfig(robin_h=1.0), n, n)
        exact = radial_profile(2, 1.0, 1.0, 2.0).u(1.0 + st_.s)
        errs.append(np.max(np.abs(st_.nodal - exact[:, None])))
        assert st_.max_principle_ok and st_.linear_residual <= 1e-10
    assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


def test_sharp_energy_of_circle_converges_to_radial_energy():
    R = 1.5402139531585497
    want = radial_profile(2, 4.0, 1.0, R, 1.0).energy
    shape = StarShape.circle(R)
    e = energy_sharp(solve_state(shape, CFG, 64, 128), shape, CFG)
    assert e.total == pytest.approx(want.total, rel=2e-4)
    assert e.volume == pytest.approx(want.volume, rel=1e-12)


def test_off_centre_disk_state_is_bounded_and_monotone_flux():
    cfg = ProblemConfig(robin_h=2.0, volume_cost=1.0, omega=Disk((0.2, 0.1), 1.0))
    st_ = solve_state(StarShape.circle(2.0), cfg, 32, 64)
    assert st_.max_principle_ok
    assert 0.0 < st_.nodal.min() and st_.nodal.max() <= 1.0 + 1e-12
    # the thinnest side of the insulator loses most heat
    k_thin = int(np.argmin(st_.r_outer[0] - st_.rho[0]))
    assert st_.flux_inner[k_thin] == pytest.approx(st_.flux_inner.max(), rel=0.05)


@settings(max_examples=8)
@given(a1=st.floats(-0.1, 0.1), b2=st.floats(-0.05, 0.05), a0=st.floats(1.3, 2.0))
def test_flux_identity_within_calibrated_bound(a1, b2, a0):
    shape = StarShape((0.0, 0.0), a0, (a1, 0.0), (0.0, b2))
    st_ = solve_state(shape, CFG, 32, 64)
    flux = energy_from_flux(st_, check=True)
    quad = energy_sharp(st_, shape, CFG)
    assert abs(flux.total - quad.total) / quad.total <= FLUX_K * (1 / 32**2 + 1 / 64**2)


def test_flux_identity_second_order():
    gaps = []
    for n in (32, 64, 128):
        st_ = solve_state(PERTURBED, CFG, n, n)
        gaps.append(abs(energy_from_flux(st_, check=False).total
                        - energy_sharp(st_, PERTURBED, CFG).total))
    assert math.log2(gaps[0] / gaps[1]) > 1.8 and math.log2(gaps[1] / gaps[2]) > 1.8


def test_energy_from_flux_detects_inconsistent_state():
    st_ = solve_state(PERTURBED, CFG, 16, 32)
    st_.flux_inner = st_.flux_inner * 1.2
    with pytest.raises(SolverError, match="disagree"):
        energy_from_flux(st_)


def test_energy_sharp_rejects_foreign_state():
    st_ = solve_state(PERTURBED, CFG, 16, 32)
    with pytest.raises(PreconditionError):
        energy_sharp(st_, StarShape.circle(1.6), CFG)
    with pytest.raises(PreconditionError):
        energy_sharp(st_, PERTURBED, ProblemConfig(robin_h=3.0))


def test_zero_h_gives_constant_state():
    cfg = ProblemConfig(robin_h=0.0, allow_degenerate=True)
    st_ = solve_state(StarShape.circle(1.5), cfg, 16, 32)
    assert np.allclose(st_.nodal, 1.0, atol=1e-10)
    assert energy_sharp(st_, st_.shape, cfg).dirichlet == pytest.approx(0.0, abs=1e-12)

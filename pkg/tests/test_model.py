import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from insulate.errors import PreconditionError
from insulate.grid import (FaceSet, GridField, boundary_faces, difference_operator,
                           face_differences, face_to_cell_sum)
from insulate.model import (Disk, EnergyBreakdown, GridMask, ProblemConfig, SBVParams, StarDomain,
                            Union2, check_covers_omega, energy_sbv, jump_faces, omega_mask,
                            two_sided_faces)

from oracles import sbv_energy_loops


# ---------------------------------------------------------------- grid stencils

@given(arrays(float, (5, 7), elements=st.floats(-3, 3)), st.floats(0.1, 2), st.floats(0.1, 2))
def test_difference_operator_matches_face_differences(v, dx, dy):
    G = difference_operator(7, 5, dx, dy)
    dvx, dvy = face_differences(v)
    want = np.concatenate([dvx.ravel() / dx, dvy.ravel() / dy])
    assert np.allclose(G @ v.ravel(), want)


def test_face_to_cell_sum_counts_neighbours():
    P = face_to_cell_sum(4, 3)
    deg = (P.T @ np.ones(P.shape[0])).reshape(3, 4)
    assert deg[0, 0] == 2 and deg[1, 1] == 4 and deg[0, 1] == 3


def test_boundary_faces_of_square_block():
    m = np.zeros((6, 6), bool)
    m[1:4, 2:5] = True
    assert boundary_faces(m, (0, 0), (0.5, 0.25)).length == pytest.approx(2 * 3 * 0.25 + 2 * 3 * 0.5)


def test_faceset_algebra():
    a = FaceSet(np.array([[True, False]]), np.zeros((0, 3), bool), (0, 0), (1, 1))
    b = FaceSet(np.array([[True, True]]), np.zeros((0, 3), bool), (0, 0), (1, 1))
    assert (a | b).length == 2 and (a & b).length == 1 and (b - a).length == 1


def test_gridfield_rejects_nan_with_position():
    with pytest.raises(PreconditionError, match="row 1, column 2"):
        GridField(3, 2, (0, 0), (1, 1), np.array([[0, 0, 0], [0, 0, np.nan]]))


# ---------------------------------------------------------------- domains

@given(px=st.floats(-0.5, 0.5), py=st.floats(-0.5, 0.5), t=st.floats(0, 2 * np.pi))
def test_disk_radius_about_hits_the_circle(px, py, t):
    d = Disk((0.3, -0.2), 1.2)
    r, dr, ddr = d.radius_about((0.3 + px, -0.2 + py), np.array([t, t + 1e-6, t - 1e-6]))
    x = 0.3 + px + r[0] * math.cos(t)
    y = -0.2 + py + r[0] * math.sin(t)
    assert math.hypot(x - 0.3, y + 0.2) == pytest.approx(1.2, abs=1e-12)
    assert dr[0] == pytest.approx((r[1] - r[2]) / 2e-6, rel=1e-4, abs=1e-6)


def test_star_domain_area_and_perimeter():
    s = StarDomain(a0=1.0, a=(0.1,), b=(0.0,))
    assert s.area == pytest.approx(math.pi * (1 + 0.5 * 0.01))
    assert StarDomain().perimeter == pytest.approx(2 * math.pi, rel=1e-12)
    with pytest.raises(PreconditionError):
        StarDomain(a0=0.5, a=(0.6,), b=(0.0,))


def test_grid_mask_requires_connected_binary():
    g = GridField.square(8, 1.0)
    v = np.zeros((8, 8))
    v[1, 1] = v[5, 5] = 1
    with pytest.raises(PreconditionError, match="connected"):
        GridMask(g.with_values(v))
    with pytest.raises(PreconditionError):
        GridMask(g.with_values(v * 0.5))


def test_union_contains_both_pieces():
    u = Union2(Disk(), Disk((3.0, 0.0), 0.5))
    assert u.contains(np.array([0.0, 3.0, 2.0]), np.zeros(3)).tolist() == [True, True, False]
    assert u.perimeter == pytest.approx(2 * math.pi * 1.5)


def test_config_validation():
    with pytest.raises(PreconditionError):
        ProblemConfig(robin_h=0.0)
    with pytest.raises(PreconditionError):
        ProblemConfig(volume_cost=-1.0)
    with pytest.raises(PreconditionError):
        ProblemConfig(dim=4)
    assert ProblemConfig(robin_h=2.0).detached_energy == pytest.approx(4 * math.pi)


def test_energy_breakdown_rejects_negative_parts():
    with pytest.raises(PreconditionError):
        EnergyBreakdown.of(1.0, -1e-3, 0.0)
    e = EnergyBreakdown.of(1, 2, 3)
    assert e.total == 6 and e.as_dict()["surface"] == 2


@pytest.mark.parametrize("tau", [0.0, 1.0, 1.5])
def test_sbv_params_range(tau):
    with pytest.raises(PreconditionError):
        SBVParams(jump_threshold=tau)


# ---------------------------------------------------------------- SBV energy

def _field_with_omega(values, n=10, hw=2.0):
    g = GridField.square(n, hw)
    cfg = ProblemConfig(robin_h=1.7, volume_cost=0.6, omega=Disk((0.0, 0.0), 0.5))
    inside = omega_mask(cfg.omega, g)
    vals = np.where(inside, 1.0, values)
    return g.with_values(vals), cfg, inside


@given(arrays(float, (10, 10), elements=st.floats(0, 1)), st.floats(0.05, 0.9),
       st.floats(0.01, 0.5))
def test_energy_sbv_matches_face_loop(values, tau, cut):
    u, cfg, inside = _field_with_omega(values)
    e = energy_sbv(u, cfg, SBVParams(tau, cut))
    d, s, v = sbv_energy_loops(u.values, u.dx, u.dy, inside, cfg.robin_h, cfg.volume_cost, tau, cut)
    assert e.dirichlet == pytest.approx(d, rel=1e-12, abs=1e-12)
    assert e.surface == pytest.approx(s, rel=1e-12, abs=1e-12)
    assert e.volume == pytest.approx(v, rel=1e-12, abs=1e-12)


@given(arrays(float, (10, 10), elements=st.floats(0, 1)))
def test_two_sided_faces_are_jump_faces_with_positive_traces(values):
    u, _, _ = _field_with_omega(values)
    j = jump_faces(u, 0.2)
    t = two_sided_faces(u, 0.2, 0.05)
    assert not np.any(t.vertical & ~j.vertical) and not np.any(t.horizontal & ~j.horizontal)
    assert np.all(u.values[:, 1:][t.vertical] > 0.05) and np.all(u.values[:, :-1][t.vertical] > 0.05)


def test_energy_sbv_of_sharp_disk():
    # u = 1 on a digital disk of radius 1, zero outside: surface = h * staircase length
    g = GridField.square(64, 2.0)
    x, y = g.centers()
    inside = np.hypot(x, y) <= 1.0
    cfg = ProblemConfig(robin_h=2.0, volume_cost=1.0, omega=Disk((0.0, 0.0), 1.0))
    e = energy_sbv(g.with_values(inside.astype(float)), cfg)
    per = boundary_faces(inside, g.origin, g.spacing).length
    assert e.dirichlet == 0 and e.volume == 0
    assert e.surface == pytest.approx(2.0 * per)
    assert 1.0 < per / (2 * math.pi) <= 4 / math.pi + 0.02


def test_energy_sbv_preconditions():
    g = GridField.square(10, 2.0)
    cfg = ProblemConfig(omega=Disk((0.0, 0.0), 0.5))
    with pytest.raises(PreconditionError, match="hold 1"):
        energy_sbv(g, cfg)
    with pytest.raises(PreconditionError, match="cover"):
        check_covers_omega(GridField.square(10, 0.5), cfg.omega)

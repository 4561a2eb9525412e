import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from insulate.analysis import (blowup_scan, check_lower_bound, convexity_defect, density_profile,
                               digital_hull, face_length_in_ball, flatness,
                               half_homogeneous_profile, hole_geometry, projection_width)
from insulate.errors import PreconditionError
from insulate.grid import GridField, boundary_faces
from insulate.model import Disk, ProblemConfig

from oracles import convexity_defect_oracle, digital_disk_boundary_length, hull_lattice_mask

masks = arrays(bool, st.tuples(st.integers(1, 7), st.integers(1, 7)), elements=st.booleans()
               ).filter(lambda m: m.any())


# ---------------------------------------------------------------- lower bound

def test_lower_bound_of_two_level_field():
    g = GridField.square(20, 1.0)
    v = np.zeros((20, 20))
    v[5:15, 5:15] = 0.4
    v[8:12, 8:12] = 0.9
    rep = check_lower_bound(g.with_values(v), 0.05)
    assert rep.delta_obs == 0.4 and rep.gap_mass == 0.0 and not rep.violation
    # a 10 x 10 block: perimeter 40 cells, budget = 40 dx^2 / area
    assert rep.halo_budget == pytest.approx(40 / 400)


def test_lower_bound_flags_diffuse_tail():
    g = GridField.square(20, 1.0)
    v = np.full((20, 20), 0.06)
    v[:, :10] = 0.8
    rep = check_lower_bound(g.with_values(v), 0.05)
    assert rep.delta_obs == pytest.approx(0.06)
    assert rep.delta_p05 == pytest.approx(0.06) and not rep.violation
    v[:, :2] = 0.5
    v[:, 10:] = np.linspace(0.06, 0.5, 10)
    rep = check_lower_bound(g.with_values(v), 0.05)
    assert rep.gap_mass_p05 > 0


def test_lower_bound_of_empty_phase():
    rep = check_lower_bound(GridField.square(8, 1.0), 0.05)
    assert math.isnan(rep.delta_obs) and not rep.violation


# ---------------------------------------------------------------- density

def _disk_faces(n=128, hw=2.0, radius=1.0):
    g = GridField.square(n, hw)
    x, y = g.centers()
    return boundary_faces(np.hypot(x, y) <= radius, g.origin, g.spacing), g.dx


def test_face_length_of_digital_disk_matches_staircase_oracle():
    K, dx = _disk_faces()
    assert face_length_in_ball(K, (0.0, 0.0), 1.9) == pytest.approx(
        digital_disk_boundary_length(1.0, dx), rel=1e-12)


def test_density_ratio_on_a_circle_and_skips():
    K, dx = _disk_faces()
    rep = density_profile(K, [(1.0, 0.0), (0.0, -1.0)], [0.4, 0.2, 2 * dx, 1.5])
    assert len(rep.entries) == 4
    assert {s[3] for s in rep.skipped} == {"radius below 4 grid spacings", "ball leaves the grid"}
    # a smooth curve gives ratio 2 (chord) up to the l1 staircase factor
    assert 1.9 <= rep.min_ratio and rep.max_ratio <= 2 * 4 / math.pi * 1.05


# ---------------------------------------------------------------- flatness and blow-ups

def test_flatness_of_line_and_circle():
    t = np.linspace(-1, 1, 401)
    line = np.column_stack([t, 0.5 * t])
    # the angle search stops at 1e-10 rad, so only near-zero is attainable
    assert flatness(line, (0.0, 0.0), 0.5) == pytest.approx(0.0, abs=1e-8)
    R, r = 2.0, 0.2
    phi = np.linspace(0, 2 * np.pi, 20001)
    circ = np.column_stack([R * np.cos(phi), R * np.sin(phi)])
    # sagitta of the chord of half-length ~r, halved: r / (4R) to leading order
    assert flatness(circ, (R, 0.0), r) == pytest.approx(r / (4 * R), rel=0.02)


def test_half_homogeneous_profile_has_constant_scaled_energy():
    g = GridField.square(512, 1.0, center=(1e-4, 2e-4))
    u = g.with_values(half_homogeneous_profile(*g.centers()))
    rep = blowup_scan(u, (0.0, 0.0), np.geomspace(0.8, 0.1, 4), tau=10.0)
    assert np.allclose(rep.e_r, math.pi / 2, rtol=0.05)
    assert rep.classification == "singular-candidate"


def test_blowup_of_smooth_field_is_flat_candidate():
    g = GridField.square(256, 1.0)
    x, y = g.centers()
    u = g.with_values(np.where(x > 0.0, 1.0, 0.0) + 0.1 * y)
    rep = blowup_scan(u, (0.0, 0.0), np.geomspace(0.5, 0.05, 4), tau=0.5)
    assert rep.classification == "flat-candidate"
    assert rep.flatness[-1] < 1e-9


def test_blowup_preconditions_and_unresolved():
    g = GridField.square(64, 2.0)
    cfg = ProblemConfig(omega=Disk((0.0, 0.0), 1.0))
    with pytest.raises(PreconditionError, match="Omega"):
        blowup_scan(g, (1.2, 0.0), [0.5, 0.1], cfg=cfg)
    with pytest.raises(PreconditionError, match="decreasing"):
        blowup_scan(g, (1.8, 0.0), [0.1, 0.2])
    with pytest.raises(PreconditionError):
        blowup_scan(np.zeros((4, 4)), (0.0, 0.0), [0.2, 0.1])
    rep = blowup_scan(g, (1.8, 0.0), [0.1, g.dx], cfg=cfg)
    assert rep.classification == "unresolved" and "two grid spacings" in rep.note


# ---------------------------------------------------------------- convexity

@settings(max_examples=150)
@given(masks)
def test_hull_matches_triangle_oracle(m):
    assert np.array_equal(digital_hull(m), hull_lattice_mask(m))
    assert convexity_defect(m) == pytest.approx(convexity_defect_oracle(m), abs=1e-15)


@given(masks)
def test_hull_is_idempotent_and_defect_nonnegative(m):
    h = digital_hull(m)
    assert np.all(h[m]) and convexity_defect(m) >= 0
    assert np.array_equal(digital_hull(h), h) and convexity_defect(h) == 0


@given(masks, st.integers(0, 3), st.booleans())
def test_defect_is_invariant_under_lattice_symmetries(m, k, flip):
    t = np.rot90(m, k)
    t = t[:, ::-1] if flip else t
    assert convexity_defect(t) == pytest.approx(convexity_defect(m), abs=1e-15)


def test_defect_of_l_shape_and_empty_mask():
    m = np.zeros((3, 3), bool)
    m[:, 0] = m[2, :] = True
    assert convexity_defect(m) == pytest.approx(1 / 5)
    with pytest.raises(PreconditionError):
        convexity_defect(np.zeros((3, 3), bool))


def test_projection_width_of_pixel_blocks():
    m = np.zeros((5, 5), bool)
    m[1:3, 1:4] = True
    assert projection_width(m, 0.5, 0.0) == pytest.approx(1.5)
    assert projection_width(m, 0.5, np.pi / 2) == pytest.approx(1.0)
    one = np.zeros((3, 3), bool)
    one[1, 1] = True
    assert projection_width(one, 1.0, np.pi / 4) == pytest.approx(math.sqrt(2))


# ---------------------------------------------------------------- holes

def test_hole_geometry_of_square_hole_and_border_hole():
    labels = np.zeros((12, 12), int)
    labels[3:7, 3:7] = 1
    labels[0:2, 8:11] = 2
    reps = hole_geometry(labels, 0.5)
    assert reps[1].skipped and "border" in reps[1].note
    sq = reps[0]
    assert not sq.skipped and sq.area == pytest.approx(4.0) and sq.perimeter == pytest.approx(8.0)
    assert sq.convexity_defect == 0 and sq.roundness == pytest.approx(2.0 / 8.0)
    assert math.isnan(sq.separation_ratio)


def test_hole_separation_from_the_rest_of_k():
    hole = np.zeros((16, 16), bool)
    hole[4:8, 4:8] = True
    outer = np.zeros((16, 16), bool)
    outer[2:14, 2:14] = True
    K = boundary_faces(hole, (0.0, 0.0), (1.0, 1.0)) | boundary_faces(outer, (0.0, 0.0), (1.0, 1.0))
    (rep,) = hole_geometry([hole], 1.0, K)
    # nearest outer face midpoint lies two cells beyond the hole's face midpoints
    assert rep.separation_ratio == pytest.approx(2.0 / 16.0)

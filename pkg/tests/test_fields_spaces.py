import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hardstop.fields import (DirectionGrid, FieldError, GridMismatchError, RadialBoundaryField,
                             UnboundedVolumeError, fmt, plane_to_workspace)
from hardstop.geometry import WorkspaceVector
from hardstop.spaces import (contains_point, difference_volumes, field_volume, orthotope_field,
                             space_metrics, trajectory_containment, volume_fraction)
from hardstop.stress import LinearSuperposition, Radial, safe_boundary_field
from hardstop.trajectory import Trajectory

DEG = math.radians(1.0)


def constant_field(grid, r, label="c"):
    return RadialBoundaryField(grid, np.full((grid.n_sep, grid.n_alpha), float(r)), 0.0, label)


# -- grid ------------------------------------------------------------------------

def test_default_grid():
    g = DirectionGrid()
    assert (g.n_alpha, g.n_sep) == (72, 7)
    assert g.seps[-1] == pytest.approx(math.pi / 2)
    assert g.sep_weights.sum() == pytest.approx(math.pi / 2, rel=1e-15)
    assert g.d_alpha == pytest.approx(math.radians(5))


def test_grid_validation():
    with pytest.raises(FieldError):
        DirectionGrid(n_alpha=10)
    with pytest.raises(FieldError):
        DirectionGrid(n_sep=0)
    with pytest.raises(FieldError):
        DirectionGrid(delta_ref=0.0)


def test_refined_grid_nests_the_original():
    g = DirectionGrid(24, 4)
    r = g.refined()
    assert (r.n_alpha, r.n_sep) == (48, 7)
    np.testing.assert_allclose(r.alphas[::2], g.alphas)
    np.testing.assert_allclose(r.seps[::2], g.seps)


def test_locate_maps_second_quadrant_to_supplement():
    g = DirectionGrid()
    sep, alpha, r = g.locate(WorkspaceVector(3.0, 4.0 * DEG, math.radians(150)))
    assert sep == pytest.approx(math.radians(30))
    assert alpha == pytest.approx(math.pi - math.atan2(4.0, 3.0))
    assert r == pytest.approx(5.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, math.pi / 2), st.floats(0, 2 * math.pi), st.floats(0.01, 5.0))
def test_plane_point_round_trip(sep, alpha, r):
    g = DirectionGrid()
    w = g.workspace(sep, alpha, r)
    s2, a2, r2 = g.locate(w)
    assert r2 == pytest.approx(r, rel=1e-12)
    # the workspace vector is shared by (alpha) and (alpha + pi)
    x, y = g.plane_point(s2, a2, r2)
    x0, y0 = g.plane_point(sep, alpha, r)
    assert (abs(x - x0) < 1e-9 and abs(y - y0) < 1e-9) or \
        (abs(x + x0) < 1e-9 and abs(y + y0) < 1e-9) or min(abs(x0), abs(y0)) < 1e-9


def test_plane_to_workspace_quadrants():
    assert plane_to_workspace(0.5, 1.0, 0.1).theta_sep == 0.5
    assert plane_to_workspace(0.5, -1.0, 0.1).theta_sep == pytest.approx(math.pi - 0.5)
    assert plane_to_workspace(0.5, -1.0, -0.1).theta_sep == 0.5


# -- field ----------------------------------------------------------------------

def test_field_rejects_bad_radii():
    g = DirectionGrid(8, 1)
    with pytest.raises(FieldError):
        RadialBoundaryField(g, np.ones((2, 8)))
    with pytest.raises(FieldError):
        RadialBoundaryField(g, np.zeros((1, 8)))


def test_radius_interpolation_is_exact_on_nodes_and_periodic():
    g = DirectionGrid(8, 3)
    radii = np.arange(24, dtype=float).reshape(3, 8) + 1
    f = RadialBoundaryField(g, radii)
    assert f.radius_at(g.seps[1], g.alphas[3]) == 12.0
    assert f.radius_at(0.0, 2 * math.pi - g.d_alpha / 2) == pytest.approx(0.5 * (8 + 1))
    assert f.radius_at(g.seps[0] / 2 + g.seps[1] / 2, 0.0) == pytest.approx(5.0)


def test_field_csv_round_trip_is_byte_stable(tmp_path):
    g = DirectionGrid(8, 2)
    radii = np.array([[1 / 3, 2, 3, math.inf, 1 / 3, 2, 3, math.inf]] * 2)
    f = RadialBoundaryField(g, radii)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    f.to_csv(a)
    back = RadialBoundaryField.from_csv(a)
    back.to_csv(b)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "sep_deg,alpha_deg,radius_scaled,unbounded_flag"
    assert "0.333333333" in a.read_text()
    assert np.isinf(back.radii[0, 3])


def test_fmt():
    assert fmt(1 / 3) == "0.333333333"
    assert fmt(math.inf) == "inf"
    assert fmt(123456789012.0) == "1.23456789e+11"


# -- volumes -----------------------------------------------------------------------

@pytest.mark.parametrize("n_alpha,n_sep", [(8, 1), (72, 7), (360, 2)])
def test_constant_radius_volume_is_exact(n_alpha, n_sep):
    g = DirectionGrid(n_alpha, n_sep)
    assert field_volume(constant_field(g, 2.0)) == pytest.approx(
        (math.pi / 2) * math.pi * 4.0, rel=1e-13)


def test_diamond_volume_converges_to_area():
    g = DirectionGrid(360, 1)
    m = LinearSuperposition(100.0, 100.0 / DEG)
    f = safe_boundary_field(m, 300.0, g)
    # diamond with half-diagonals 3 and 3 -> area 18 per slice
    assert field_volume(f) == pytest.approx((math.pi / 2) * 18.0, rel=1e-3)


def test_orthotope_field_matches_box():
    g = DirectionGrid(8, 1)
    f = orthotope_field({"delta": (-1.0, 2.0), "theta": (-3.0, 4.0)}, g)
    np.testing.assert_allclose(f.radii[0, [0, 2, 4, 6]], [2.0, 4.0, 1.0, 3.0])
    assert f.radii[0, 1] == pytest.approx(2.0 * math.sqrt(2))


def test_orthotope_half_open_is_unbounded():
    g = DirectionGrid(8, 1)
    f = orthotope_field({"delta": (-1.0, 1.0)}, g)
    assert np.isinf(f.radii[0, 2])
    with pytest.raises(UnboundedVolumeError, match="alpha=90"):
        field_volume(f)


def test_orthotope_validation():
    with pytest.raises(ValueError):
        orthotope_field({"delta": (0.5, 1.0)}, DirectionGrid())
    with pytest.raises(ValueError):
        orthotope_field({"bogus": (-1.0, 1.0)}, DirectionGrid())


def test_identical_fields_give_unit_fraction():
    g = DirectionGrid()
    f = safe_boundary_field(Radial(100.0), 480.0, g)
    m = space_metrics(f, f)
    assert m.phi_hs == 1.0
    assert m.vol_unprotected == 0.0 and m.vol_overprotected == 0.0
    assert m.contained


def test_difference_volumes_of_nested_discs():
    g = DirectionGrid(72, 3)
    inner, outer = constant_field(g, 1.0), constant_field(g, 2.0)
    unprot, over = difference_volumes(outer, inner)
    assert unprot == pytest.approx((math.pi / 2) * math.pi * 3.0, rel=1e-13)
    assert over == 0.0
    m = space_metrics(inner, outer)
    assert m.phi_hs == pytest.approx(0.25, rel=1e-14)
    assert m.contained


def test_grid_mismatch_is_an_error():
    with pytest.raises(GridMismatchError):
        volume_fraction(constant_field(DirectionGrid(8, 1), 1.0),
                        constant_field(DirectionGrid(16, 1), 1.0))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_volume_additivity(seed):
    g = DirectionGrid(24, 4)
    rng = np.random.default_rng(seed)
    a = RadialBoundaryField(g, rng.uniform(0.5, 3.0, (4, 24)))
    b = RadialBoundaryField(g, rng.uniform(0.5, 3.0, (4, 24)))
    m = space_metrics(a, b)
    assert m.vol_hs == pytest.approx(m.vol_overlap + m.vol_unprotected, rel=1e-12)
    assert m.vol_sigma == pytest.approx(m.vol_overlap + m.vol_overprotected, rel=1e-12)


def test_containment_flag_uses_relative_tolerance():
    g = DirectionGrid(8, 1)
    sig = constant_field(g, 1.0)
    radii = np.ones((1, 8))
    radii[0, 0] = 1.0 + 1e-9
    assert not space_metrics(RadialBoundaryField(g, radii), sig).contained
    assert space_metrics(RadialBoundaryField(g, radii), sig, containment_tol=1e-6).contained


def test_metrics_to_dict_keys():
    g = DirectionGrid(8, 1)
    d = space_metrics(constant_field(g, 1.0), constant_field(g, 2.0)).to_dict()
    assert set(d) == {"vol_hs", "vol_sigma", "phi_hs", "vol_unprotected", "vol_overprotected",
                      "contained", "grid"}


# -- membership -------------------------------------------------------------------

def test_contains_point_is_strict():
    g = DirectionGrid(8, 1)
    f = constant_field(g, 2.0)
    assert contains_point(f, WorkspaceVector(1.9, 0.0))
    assert not contains_point(f, WorkspaceVector(2.0, 0.0))


def test_trajectory_containment_margins():
    g = DirectionGrid(8, 1)
    f = constant_field(g, 2.0)
    traj = Trajectory.from_workspaces([WorkspaceVector(0.5, 0.0), WorkspaceVector(2.5, 0.0),
                                       WorkspaceVector(0.0, 1.0 * DEG)])
    rep = trajectory_containment(f, traj)
    np.testing.assert_allclose(rep.margins, [1.5, -0.5, 1.0])
    assert rep.violations == [1] and not rep.passed
    assert rep.min_margin == pytest.approx(-0.5)

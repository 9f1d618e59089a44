import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from screenbem.geometry import (
    PrefractalFamily,
    ScreenPanelMesh,
    ScreenRegion,
    cantor_dust_prefractal,
    cantor_prefractal,
    grid_inner_approx,
    grid_outer_approx,
    irregular_circles,
    koch_edge_count,
    koch_prefractal,
    mesh,
    sierpinski_prefractal,
    solid_minus_cantor,
    swiss_cheese_prefractal,
)

SQ = ScreenRegion(3, (np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),))
TRI_AREA = math.sqrt(3) / 4


def _intervals(ivs):
    return [tuple(map(float, iv)) for iv in ivs]


# --------------------------------------------------------------------------- #
# Cantor
# --------------------------------------------------------------------------- #
def test_cantor_examples():
    assert _intervals(cantor_prefractal(1 / 3, 0)) == [(0.0, 1.0)]
    e1 = cantor_prefractal(1 / 3, 1)
    assert np.allclose(e1, [(0, 1 / 3), (2 / 3, 1)], atol=1e-15)
    e2 = cantor_prefractal(0.5, 2)
    assert np.allclose(e2, [(0, 1 / 16), (3 / 16, 1 / 4), (3 / 4, 13 / 16), (15 / 16, 1)], atol=1e-15)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.2, 1.5])
def test_cantor_rejects_lambda(lam):
    with pytest.raises(ValueError):
        cantor_prefractal(lam, 1)
    with pytest.raises(ValueError):
        cantor_dust_prefractal(lam, 1)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(0, 7))
def test_cantor_structure(lam, j):
    ivs = cantor_prefractal(lam, j)
    alpha = (1 - lam) / 2
    assert len(ivs) == 2**j
    lengths = np.array([b - a for a, b in ivs])
    assert np.allclose(lengths, alpha**j, rtol=1e-12)
    assert abs(lengths.sum() - (2 * alpha) ** j) <= 1e-12 * max(1.0, (2 * alpha) ** j)
    assert all(ivs[i][1] < ivs[i + 1][0] for i in range(len(ivs) - 1))
    if j > 0:
        parent = ScreenRegion(2, tuple(np.array(iv) for iv in cantor_prefractal(lam, j - 1)))
        child = ScreenRegion(2, tuple(np.array(iv) for iv in ivs))
        assert parent.covers(child)


def test_cantor_dust_examples():
    d0 = cantor_dust_prefractal(1 / 3, 0)
    assert len(d0) == 1 and np.allclose(d0[0], [[0, 0], [1, 0], [1, 1], [0, 1]])
    d1 = cantor_dust_prefractal(1 / 3, 1)
    assert len(d1) == 4
    lows = sorted(tuple(np.round(c.min(axis=0), 12)) for c in d1)
    assert np.allclose(lows, [(0, 0), (0, 2 / 3), (2 / 3, 0), (2 / 3, 2 / 3)])
    assert all(np.allclose(np.ptp(c, axis=0), 1 / 3) for c in d1)
    d2 = cantor_dust_prefractal(0.5, 2)
    ivs = cantor_prefractal(0.5, 2)
    corners = {(a, c) for (a, _) in ivs for (c, _) in ivs}
    assert len(d2) == 16
    assert {tuple(c.min(axis=0)) for c in d2} == corners
    assert all(np.allclose(np.ptp(c, axis=0), 1 / 16) for c in d2)


@pytest.mark.parametrize("lam,j", [(1 / 3, 3), (0.6, 2), (0.5, 4)])
def test_dust_area(lam, j):
    r = ScreenRegion(3, tuple(cantor_dust_prefractal(lam, j)))
    assert abs(r.measure() - (1 - lam) ** (2 * j)) < 1e-12


# --------------------------------------------------------------------------- #
# Sierpinski and Koch
# --------------------------------------------------------------------------- #
@pytest.mark.parametrize("j", [1, 2, 3, 4, 5])
def test_sierpinski_counts_and_area(j):
    tris = sierpinski_prefractal(j)
    assert len(tris) == 3 ** (j - 1)
    side = 2.0 ** (1 - j)
    for t in tris:
        sides = [np.linalg.norm(t[i] - t[(i + 1) % 3]) for i in range(3)]
        assert np.allclose(sides, side, rtol=1e-12)
    area = ScreenRegion(3, tuple(tris)).measure()
    assert abs(area - 0.75 ** (j - 1) * TRI_AREA) < 1e-12


def test_sierpinski_nested_and_rejects_level():
    for j in (1, 2, 3):
        a = ScreenRegion(3, tuple(sierpinski_prefractal(j)))
        b = ScreenRegion(3, tuple(sierpinski_prefractal(j + 1)))
        assert a.covers(b)
    with pytest.raises(ValueError):
        sierpinski_prefractal(0)


@pytest.mark.parametrize("j,factor", [(1, 1.0), (2, 4 / 3), (3, 1 + 1 / 3 + 4 / 27)])
def test_koch_area_and_edges(j, factor):
    r = koch_prefractal(j)
    assert koch_edge_count(j) == 3 * 4 ** (j - 1)
    assert abs(r.measure() - factor * TRI_AREA) < 1e-12
    assert r.kind == "open"


def test_koch_nested_increasing():
    assert koch_prefractal(3).covers(koch_prefractal(2))
    assert koch_prefractal(2).covers(koch_prefractal(1))
    with pytest.raises(ValueError):
        koch_prefractal(0)


# --------------------------------------------------------------------------- #
# Swiss cheese, solid minus, grids
# --------------------------------------------------------------------------- #
def test_swiss_cheese_level_zero_and_one():
    assert abs(swiss_cheese_prefractal(0).measure() - 1.0) < 1e-12
    r1 = 6 * 0.1 / math.pi**2
    f1 = swiss_cheese_prefractal(1)
    # exact F_1 has measure 1 - pi r1^2; grid cells meeting the disc are
    # dropped, and every cell outside radius r1 + sqrt(2) s is kept
    s = 2.0**-5
    assert 1 - math.pi * (r1 + math.sqrt(2) * s) ** 2 <= f1.measure() <= 1 - math.pi * r1**2
    assert swiss_cheese_prefractal(0).covers(swiss_cheese_prefractal(2))


def test_swiss_cheese_grid_measure_converges():
    # one disc of radius 0.3 at the centre; grid cells not meeting it
    from screenbem.geometry import _box_ball_distance, _grid_cells

    exact = 1 - math.pi * 0.09
    errs = []
    for level in (4, 6, 8):
        s, boxes = _grid_cells(level, 2)
        keep = _box_ball_distance(boxes, np.array([0.5, 0.5])) >= 0.3
        errs.append(abs(keep.sum() * s * s - exact))
    assert errs[0] > errs[1] > errs[2] and errs[2] < 0.01


def test_swiss_cheese_empty_flagged():
    with pytest.raises(ValueError):
        swiss_cheese_prefractal(1, radius_rule=lambda m: 5.0)


def test_solid_minus_cantor():
    r = solid_minus_cantor(1 / 3, 1)
    assert np.allclose(np.array(r.cells), [[1 / 3, 2 / 3]])
    r3 = solid_minus_cantor(1 / 3, 3, n=3)
    assert abs(r3.measure() - (1 - (2 / 3) ** 6)) < 1e-12
    assert solid_minus_cantor(1 / 3, 3).covers(solid_minus_cantor(1 / 3, 2))


def test_irregular_circles_increasing():
    a, b = irregular_circles(1, level=6), irregular_circles(2, level=6)
    assert b.covers(a) and b.measure() > a.measure()


def test_grid_outer_point_and_cantor():
    p = grid_outer_approx(np.array([[0.3, 0.3]]), 3)
    assert len(p) == 1 and abs(p.measure() - 1 / 64) < 1e-15
    corner = grid_outer_approx(np.array([[0.5, 0.5]]), 3)
    assert len(corner) == 4
    cantor = ScreenRegion(2, tuple(np.array(iv) for iv in cantor_prefractal(1 / 3, 3)))
    for j in (3, 5, 7):
        o = grid_outer_approx(cantor, j)
        assert o.covers(cantor)
        assert o.measure() <= (2 / 3) ** 3 + 2 * 8 * 2.0**-j + 1e-12


def test_grid_inner_square_and_nesting():
    for j in (2, 3, 4):
        r = grid_inner_approx(SQ, j)
        assert abs(r.measure() - (1 - 2 * 2.0**-j) ** 2) < 1e-12
        assert SQ.covers(r)
    assert grid_inner_approx(SQ, 4).covers(grid_inner_approx(SQ, 3))
    assert grid_outer_approx(SQ, 3).covers(grid_outer_approx(SQ, 4))


def test_family_nesting():
    fam = PrefractalFamily("cantor", 3, 0.5)
    assert fam.region(1).covers(fam.region(2))
    fam = PrefractalFamily("solid_minus_cantor", 2, 1 / 3)
    assert fam.region(3).covers(fam.region(2)) and fam.kind == "open"
    with pytest.raises(ValueError):
        PrefractalFamily("sierpinski", 2)
    with pytest.raises(ValueError):
        PrefractalFamily("unknown")


# --------------------------------------------------------------------------- #
# Meshes
# --------------------------------------------------------------------------- #
def test_mesh_examples():
    m = mesh(ScreenRegion(2, (np.array([0.0, 1.0]),)), 0.25)
    assert m.n_panels == 4 and np.allclose(m.panel_measures(), 0.25)
    m = mesh(SQ, math.sqrt(2))
    assert m.n_panels == 2
    m = mesh(SQ, math.sqrt(2) / 2)
    assert m.h <= math.sqrt(2) / 2 + 1e-15
    with pytest.raises(ValueError):
        mesh(SQ, 0.0)
    with pytest.raises(ValueError):
        mesh(SQ, -1.0)


regions = st.sampled_from([
    ScreenRegion(2, (np.array([0.0, 1.0]),)),
    ScreenRegion(2, tuple(np.array(iv) for iv in cantor_prefractal(1 / 3, 2))),
    SQ,
    ScreenRegion(3, tuple(sierpinski_prefractal(2))),
    ScreenRegion(3, tuple(cantor_dust_prefractal(0.5, 1))),
    koch_prefractal(2),
    solid_minus_cantor(1 / 3, 2, n=3),
])


@settings(max_examples=30, deadline=None)
@given(regions, st.floats(0.04, 1.0))
def test_mesh_partition_and_size(region, h):
    m = mesh(region, h)
    assert m.h <= h * (1 + 1e-12)
    assert abs(m.measure() - region.measure()) <= 1e-10 * region.measure()
    assert np.all(m.vertices[:, -1] == 0.0)


def test_boundary_flags_of_refined_square():
    m = mesh(SQ, 0.25)
    x = m.vertices[:, :2]
    on_edge = np.any(np.isclose(x, 0) | np.isclose(x, 1), axis=1)
    assert np.array_equal(m.boundary, on_edge)
    m2 = mesh(ScreenRegion(2, (np.array([0.0, 1.0]), np.array([2.0, 3.0]))), 0.5)
    assert set(m2.vertices[m2.boundary, 0]) == {0.0, 1.0, 2.0, 3.0}


def test_mesh_json_round_trip_is_exact():
    m = mesh(koch_prefractal(2), 0.1)
    d = json.loads(json.dumps(m.to_dict()))
    assert set(d) == {"dimension", "vertices", "panels", "boundary_vertices"}
    m2 = ScreenPanelMesh.from_dict(d)
    assert m2.hash() == m.hash()
    assert np.array_equal(m2.boundary, m.boundary)

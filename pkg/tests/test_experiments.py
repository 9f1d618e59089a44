import json

import numpy as np
import pytest

from screenbem.experiments import (
    HRule,
    converge_prefractal,
    default_observation_points,
    formulation_gap,
    hole_effect,
    null_test,
    strictly_decreasing,
    sweep_directions,
    unit_screen,
)
from screenbem.geometry import PrefractalFamily, solid_minus_cantor
from screenbem.solve import IncidentField

DOWN2 = IncidentField.plane_wave([0.0, -1.0])
CANTOR = PrefractalFamily("cantor", 2, 1 / 3)


def test_h_rule():
    r = HRule()
    assert r.subdivisions(unit_screen(2), "soft") == 2
    tri = PrefractalFamily("sierpinski", 3).region(1)
    assert r.subdivisions(tri, "hard") == 4 and r.subdivisions(tri, "soft") == 2
    m = r.build(unit_screen(2), "soft", 5.0)
    assert m.h <= 0.1 * 2 * np.pi / 5.0 + 1e-15
    with pytest.raises(ValueError):
        HRule(max_dofs=10).build(unit_screen(2), "soft", 50.0)
    with pytest.raises(ValueError):
        HRule(m_sub=0)
    assert HRule().refined().m_sub == 4


def test_observation_ring_and_distance_check():
    reg = unit_screen(3)
    pts = default_observation_points(reg)
    assert pts.shape == (16, 3)
    assert np.allclose(np.linalg.norm(pts - [0.5, 0.5, 0.0], axis=1), 2 * reg.diameter())
    with pytest.raises(ValueError):
        converge_prefractal(CANTOR, "soft", DOWN2, [1, 2], 5.0, obs_points=[[0.5, 0.2]])
    with pytest.raises(ValueError):
        converge_prefractal(CANTOR, "elastic", DOWN2, [1, 2], 5.0)
    with pytest.raises(ValueError):
        converge_prefractal(CANTOR, "soft", DOWN2, [], 5.0)


def test_converge_cantor_soft_small():
    rep = converge_prefractal(CANTOR, "soft", DOWN2, range(2, 6), 5.0)
    assert rep.levels == [2, 3, 4, 5]
    assert rep.values.shape == (4, 16)
    assert np.isnan(rep.differences[0])
    assert np.allclose(rep.cauchy, np.abs(np.diff(rep.values, axis=0)).max(axis=1))
    assert strictly_decreasing(rep.cauchy)
    csv_text = rep.to_csv()
    assert csv_text.count("\n") == 5 and "seconds" not in csv_text
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["trend"]["cauchy_strictly_decreasing"] is True
    assert len(d["rows"]) == 4 and all(len(r["mesh_hash"]) == 64 for r in d["rows"])
    assert d["config"]["quadrature"]["singular"] == 8
    assert "Cauchy" in d["expected"]


def test_converge_is_deterministic():
    a = converge_prefractal(CANTOR, "soft", DOWN2, [1, 2, 3], 3.0).to_csv()
    b = converge_prefractal(CANTOR, "soft", DOWN2, [1, 2, 3], 3.0).to_csv()
    assert a == b


def test_h_check_column():
    rep = converge_prefractal(CANTOR, "soft", DOWN2, [1, 2], 3.0, h_check=True)
    assert "mesh_delta" in rep.columns()
    assert all(r.mesh_delta < 0.05 for r in rep.records)


def test_empty_basis_level_is_exact_zero():
    rule = HRule(m_sub=1, wavelength_fraction=10.0)
    rep = converge_prefractal(CANTOR, "hard", DOWN2, [2, 3], 1.0, h_rule=rule)
    assert [r.n_dofs for r in rep.records] == [0, 0]
    assert np.all(rep.values == 0)


def test_null_test_cantor_hard_2d():
    rep = null_test(CANTOR, "hard", DOWN2, range(1, 5), 5.0)
    assert rep.decreasing and rep.passed()
    d = rep.to_dict(timings=False)
    assert d["null"]["final_ratio"] == rep.ratio and "seconds" not in d


def test_hole_effect_level_zero_exact():
    rep = hole_effect(1 / 3, DOWN2, 5.0, [0, 1, 2])
    for p in ("soft", "hard"):
        assert rep.delta[p][0] == 0.0
        assert rep.delta[p][1] > 0
    assert rep.to_csv().count("\n") == 7
    assert json.loads(json.dumps(rep.to_dict()))["delta"]["soft"][0] == 0.0


def test_formulation_gap_properties():
    open_r, closed_r = solid_minus_cantor(1 / 3, 2, 2), unit_screen(2)
    dirs = sweep_directions(16, 2)
    rep = formulation_gap(open_r, closed_r, "hard", 5.0, directions=dirs)
    # mirror pairs about the x1 = 1/2 axis: theta and pi - theta
    t = np.arctan2(dirs[:, 1], dirs[:, 0])
    for i in range(16):
        j = int(np.argmin(np.abs(np.angle(np.exp(1j * (np.pi - t[i] - t))))))
        assert abs(rep.gap[i] - rep.gap[j]) <= 1e-8 * rep.gap.max()
    assert np.count_nonzero(rep.near_zero) <= 2
    graze = formulation_gap(open_r, closed_r, "hard", 5.0, directions=[[1.0, 0.0]])
    assert graze.gap[0] == 0.0 and graze.near_zero[0]
    assert rep.to_csv().count("\n") == 17

import json

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles as O
from screenbem.assembly import (
    PIECEWISE_LINEAR,
    BasisSpec,
    EmptyBasisError,
    QuadratureError,
    QuadSpec,
    _check_finite,
    assemble,
    assemble_hypersingular,
    assemble_single_layer,
    dump_matrix,
    log_pair_integral,
    quad_coincident,
    quad_edge_adjacent,
    quad_regular,
    quad_vertex_adjacent,
    shape_gradients,
)
from screenbem.geometry import ScreenPanelMesh, ScreenRegion, cantor_prefractal, mesh, sierpinski_prefractal

UNIT = ScreenRegion(2, (np.array([0.0, 1.0]),))
SQUARE = ScreenRegion(3, (np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]),))
TRI = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def _rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


# --------------------------------------------------------------------------- #
# Quadrature routines
# --------------------------------------------------------------------------- #
def test_regular_rule_smooth_kernel():
    g = lambda x, y: 1 / np.sqrt((x - y) ** 2 + 0.25)  # noqa: E731
    ref = quad_regular([0, 1], [0, 1], g, 40)
    # poles at x - y = +-i/2 limit Gauss-10 to about 5e-10
    assert abs(quad_regular([0, 1], [0, 1], g, 10) - quad_regular([0, 1], [0, 1], g, 20)) < 1e-9
    assert abs(quad_regular([0, 1], [0, 1], g, 16) - quad_regular([0, 1], [0, 1], g, 24)) < 1e-10
    assert abs(quad_regular([0, 1], [0, 1], g, 20) - ref) < 1e-12


def test_regular_rule_order_convergence():
    P = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, 0.8]])
    Q = P + [2.0, 0.5]
    f = lambda x, y: np.exp(1j * 3 * np.linalg.norm(x - y, axis=1)) / np.linalg.norm(x - y, axis=1)  # noqa: E731
    v = {q: quad_regular(P, Q, f, q) for q in (3, 7, 11, 30)}
    e = {q: abs(v[q] - v[30]) for q in (3, 7, 11)}
    assert e[11] * 10 <= e[7] and e[7] * 10 <= e[3]


def test_log_pair_closed_forms():
    assert log_pair_integral(0, 1, 0, 1) == pytest.approx(-1.5, abs=1e-15)
    h = 0.3
    assert log_pair_integral(0, h, 0, h) == pytest.approx(h * h * (np.log(h) - 1.5), rel=1e-14)
    ref = float(mpmath.quad(lambda x: mpmath.quad(lambda y: mpmath.log(abs(x - y)), [1, 2]), [0, 1]))
    assert abs(log_pair_integral(0, 1, 1, 2) - ref) < 1e-10


def test_coincident_triangle_against_oracle():
    f = lambda x, y: 1 / (4 * np.pi * np.linalg.norm(x - y, axis=1))  # noqa: E731
    P3 = np.c_[TRI, np.zeros(3)]
    ref = O.pair_moments_3d(P3, P3, 1e-9).sum().real  # k -> 0 limit of the Helmholtz oracle
    assert abs(quad_coincident(TRI, f, 12) - ref) < 1e-7 * ref
    assert abs(quad_coincident(TRI, f, 8) - ref) < 2e-7 * ref


def test_singular_rules_integrate_smooth_functions():
    Q_edge = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    Q_vert = np.array([[1.0, 0.0], [2.0, 0.0], [1.5, 1.0]])
    one = lambda x, y: np.ones(len(x))  # noqa: E731
    lin = lambda x, y: x[:, 0] + 2 * y[:, 1]  # noqa: E731
    for Q, fn in ((Q_edge, quad_edge_adjacent), (Q_vert, quad_vertex_adjacent)):
        assert abs(fn(TRI, Q, one) - 0.25) < 1e-13
        assert abs(fn(TRI, Q, lin) - quad_regular(TRI, Q, lin, 6)) < 1e-13
    assert abs(quad_coincident(TRI, one) - 0.25) < 1e-13


def test_unknown_adjacency_rejected():
    far = TRI + 5.0
    with pytest.raises(ValueError):
        quad_edge_adjacent(TRI, far, lambda x, y: np.ones(len(x)))
    with pytest.raises(ValueError):
        quad_vertex_adjacent(TRI, far, lambda x, y: np.ones(len(x)))
    with pytest.raises(ValueError):
        quad_coincident(np.zeros((2, 2)), lambda x, y: np.ones(len(x)))
    with pytest.raises(ValueError):
        quad_regular([0, 1], [2, 3], lambda x, y: x, 0)


# --------------------------------------------------------------------------- #
# Matrices
# --------------------------------------------------------------------------- #
def test_single_layer_two_panels_matches_oracle():
    m = mesh(UNIT, 0.5)
    A = assemble_single_layer(m, 1.0).matrix
    assert _rel(A, O.oracle_single_layer(m, 1.0)) < 1e-6


def test_separated_panels_match_tensor_gauss():
    m = ScreenPanelMesh.from_panels(2, [[0.0, 0], [0.2, 0], [2.0, 0], [2.2, 0]], [[0, 1], [2, 3]])
    A = assemble_single_layer(m, 2.0).matrix
    from scipy import special

    f = lambda x, y: 0.25j * special.hankel1(0, 2.0 * np.abs(x - y))  # noqa: E731
    assert abs(A[0, 1] - quad_regular([0, 0.2], [2.0, 2.2], f, 20)) < 1e-10 * abs(A[0, 1])


def test_hypersingular_single_hat_matches_fd_oracle():
    m = mesh(UNIT, 0.5)
    k = 1.0
    A = assemble_hypersingular(m, k).matrix
    (v,) = m.interior_vertices()
    ref = O.fd_hypersingular_extrapolated(m, k, v, v)
    assert abs(A[0, 0] - ref) < 1e-4 * abs(ref)


def test_hypersingular_small_k_is_derivative_single_layer():
    m = mesh(UNIT, 0.125)
    k = 1e-5
    H = assemble_hypersingular(m, k).matrix
    S = assemble_single_layer(m, k).matrix
    basis = BasisSpec(PIECEWISE_LINEAR, m)
    dof = basis.vertex_dof_map()
    G = shape_gradients(m)[:, :, 0]
    D = np.zeros((m.n_panels, basis.dimension))
    for p, pan in enumerate(m.panels):
        for a, v in enumerate(pan):
            if dof[v] >= 0:
                D[p, dof[v]] += G[p, a]
    assert _rel(H, -D.T @ S @ D) < 1e-8


def test_hypersingular_empty_basis():
    m = mesh(UNIT, 2.0)
    assert len(m.interior_vertices()) == 0
    with pytest.raises(EmptyBasisError):
        assemble_hypersingular(m, 1.0)
    with pytest.raises(ValueError):
        assemble_single_layer(m, 0.0)
    with pytest.raises(ValueError):
        assemble("elastic", m, 1.0)


meshes = st.sampled_from([
    mesh(UNIT, 0.1),
    mesh(ScreenRegion(2, tuple(np.array(iv) for iv in cantor_prefractal(1 / 3, 2))), 0.05),
    mesh(SQUARE, 0.4),
    mesh(ScreenRegion(3, tuple(sierpinski_prefractal(2))), 0.3, min_subdivisions=4),
])


@settings(max_examples=12, deadline=None)
@given(meshes, st.floats(0.5, 8.0), st.sampled_from(["soft", "hard"]))
def test_complex_symmetry(m, k, problem):
    s = assemble(problem, m, k)
    assert s.symmetry_defect() <= 1e-10
    assert np.isfinite(s.matrix).all()


def test_panel_permutation_equivariance():
    m = mesh(ScreenRegion(3, tuple(sierpinski_prefractal(2))), 0.3)
    perm = np.random.default_rng(1).permutation(m.n_panels)
    m2 = ScreenPanelMesh(3, m.vertices, m.panels[perm], m.boundary)
    A = assemble_single_layer(m, 3.0).matrix
    B = assemble_single_layer(m2, 3.0).matrix
    assert _rel(B, A[np.ix_(perm, perm)]) < 1e-13


def test_quadrature_order_increase_changes_little():
    m = mesh(SQUARE, 0.3)
    A = assemble_single_layer(m, 4.0).matrix
    B = assemble_single_layer(m, 4.0, QuadSpec(regular=8, near=14, singular=12, far=6)).matrix
    assert _rel(A, B) < 1e-6


def test_smallest_singular_value_stays_bounded():
    # for indicator functions sigma_min ~ c h^2 (mass matrix h, inverse
    # inequality h); sigma_min/h therefore halves exactly in the limit
    hs = (1 / 16, 1 / 32, 1 / 64)
    sig = np.array([np.linalg.svd(assemble_single_layer(mesh(UNIT, h), 5.0).matrix,
                                  compute_uv=False).min() for h in hs])
    scaled = sig / np.array(hs) ** 2
    assert all(b >= 0.5 * a for a, b in zip(scaled, scaled[1:]))
    assert scaled.min() > 0.1
    ratio = (sig[1:] / hs[1:]) / (sig[:-1] / hs[:-1])
    assert np.all((ratio > 0.45) & (ratio < 0.55))


def test_non_finite_quadrature_reported():
    blocks = np.ones((2, 2, 2), dtype=complex)
    blocks[1, 0, 0] = np.nan
    with pytest.raises(QuadratureError, match=r"\(3, 7\)"):
        _check_finite(np.array([0, 3]), np.array([1, 7]), blocks)


def test_matrix_dump_round_trip(tmp_path):
    s = assemble_single_layer(mesh(UNIT, 0.25), 2.0)
    dump_matrix(s, tmp_path / "a.json")
    d = json.loads((tmp_path / "a.json").read_text())
    A = np.array([complex(*z) for z in d["data"]]).reshape(d["shape"])
    assert np.array_equal(A, s.matrix)
    dump_matrix(s, tmp_path / "a.bin", "bin")
    raw = (tmp_path / "a.bin").read_bytes()
    shape = np.frombuffer(raw[:16], dtype="<i8")
    B = np.frombuffer(raw[16:], dtype="<c16").reshape(shape)
    assert np.array_equal(B, s.matrix)

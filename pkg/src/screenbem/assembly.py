"""
Galerkin assembly of the single-layer and hypersingular forms.

Sound-soft problems use piecewise constants (one function per panel) with

    A_pq = int_p int_q Phi(x, y) ds(y) ds(x).

Sound-hard problems use hat functions at interior vertices.  On a flat
screen the hypersingular operator satisfies T = (Delta_Gamma + k^2) S, so
after integrating by parts

    A_ij = a_T(lam_j, lam_i)
         = - int int Phi(x, y) [grad lam_j(y) . grad lam_i(x) - k^2 lam_j(y) lam_i(x)],

surface gradients taken in the screen plane.  The sign makes ``A`` the
matrix of ``<T psi, psi'>``, consistent with ``u^s = +D[u]`` and the
right-hand side ``-<d_n u^i, psi>``.

Both matrices are built from the same local panel-pair blocks
``B[a, b] = int int Phi phi_a phi_b``, computed only for pairs ``q >= p``
and mirrored, so the assembled matrices are complex symmetric to rounding.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss

from . import _kernels as K
from .geometry import ScreenPanelMesh

log = logging.getLogger(__name__)

PIECEWISE_CONSTANT = "piecewise_constant"
PIECEWISE_LINEAR = "piecewise_linear_zero_boundary"
PAIR_CLASSES = ("coincident", "edge", "vertex", "near", "regular", "far")
_CHUNK_PAIRS = 100_000


class EmptyBasisError(ValueError):
    """The conforming discrete space has dimension zero."""


class QuadratureError(ArithmeticError):
    """A quadrature produced a non-finite value."""


# --------------------------------------------------------------------------- #
# Quadrature rules                                                            #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class QuadSpec:
    """Quadrature orders.

    Attributes
    ----------
    regular : int
        Gauss points per coordinate for well-separated triangle pairs.
    near : int
        Points per coordinate when the gap is below one panel diameter.
    singular : int
        Points per coordinate of the Sauter-Schwab rules.
    far : int
        Points per coordinate beyond ``far_ratio`` panel diameters.
    far_ratio : float
        Gap/diameter ratio that switches to the far rule.
    line : int
        Gauss points per sub-interval of the n = 2 convolution integrals.
    graded : int
        Points of the graded rule near u = 0 for n = 2.
    """

    regular: int = 5
    near: int = 10
    singular: int = 8
    far: int = 3
    far_ratio: float = 4.0
    line: int = 10
    graded: int = 16

    def __post_init__(self):
        for name in ("regular", "near", "singular", "far", "line", "graded"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"quadrature order {name} must be >= 1")
        if not self.far_ratio > 1.0:
            raise ValueError("far_ratio must exceed 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in
                ("regular", "near", "singular", "far", "far_ratio", "line", "graded")}


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = leggauss(int(n))
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed Gauss rule on T = {0 <= x2 <= x1 <= 1} (weights sum to 1/2)."""
    g, w = gauss01(n)
    a, b = np.meshgrid(g, g, indexing="ij")
    wa, wb = np.meshgrid(w, w, indexing="ij")
    pts = np.stack([a.ravel(), (a * b).ravel()], axis=1)
    return pts, (wa * wb * a).ravel()


def _grid4(n):
    g, w = gauss01(n)
    X = np.meshgrid(g, g, g, g, indexing="ij")
    W = np.meshgrid(w, w, w, w, indexing="ij")
    return [a.ravel() for a in X], np.prod([a.ravel() for a in W], axis=0)


def _stack(regions):
    xs = np.concatenate([np.stack(r[0], axis=1) for r in regions])
    ys = np.concatenate([np.stack(r[1], axis=1) for r in regions])
    ws = np.concatenate([r[2] for r in regions])
    return np.ascontiguousarray(xs), np.ascontiguousarray(ys), np.ascontiguousarray(ws)


@lru_cache(maxsize=None)
def sauter_schwab_rule(case: str, n: int):
    """Sauter-Schwab points (xs, ys) in T x T with weights for a singular pair.

    case 'coincident': identical triangles; 'edge': shared edge P0-P1 in
    both triangles; 'vertex': shared vertex P0.  Integrating 1 gives 1/4.
    """
    (xi, e1, e2, e3), w = _grid4(n)
    if case == "coincident":
        wj = w * xi**3 * e1**2 * e2
        A = (xi, xi * (1 - e1 + e1 * e2))
        B = (xi * (1 - e1 * e2 * e3), xi * (1 - e1))
        C = (xi, xi * e1 * (1 - e2 + e2 * e3))
        D = (xi * (1 - e1 * e2), xi * e1 * (1 - e2))
        E = (xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3))
        F = (xi, xi * e1 * (1 - e2))
        regs = [(A, B, wj), (B, A, wj), (C, D, wj), (D, C, wj), (E, F, wj), (F, E, wj)]
    elif case == "edge":
        regs = []
        maps = [
            ([xi, -xi * e1 * e2, xi * e1 * (1 - e2), xi * e1 * e3], xi**3 * e1**2),
            ([xi, -xi * e1 * e2 * e3, xi * e1 * e2 * (1 - e3), xi * e1], xi**3 * e1**2 * e2),
            ([xi * (1 - e1 * e2), xi * e1 * e2, xi * e1 * e2 * e3, xi * e1 * (1 - e2)], xi**3 * e1**2 * e2),
            ([xi * (1 - e1 * e2 * e3), xi * e1 * e2 * e3, xi * e1, xi * e1 * e2 * (1 - e3)], xi**3 * e1**2 * e2),
            ([xi * (1 - e1 * e2 * e3), xi * e1 * e2 * e3, xi * e1 * e2, xi * e1 * (1 - e2 * e3)], xi**3 * e1**2 * e2),
        ]
        for wv, jac in maps:
            regs.append(((wv[0], wv[3]), (wv[0] + wv[1], wv[2]), w * jac))
    elif case == "vertex":
        wj = w * xi**3 * e2
        A = (xi, xi * e1)
        B = (xi * e2, xi * e2 * e3)
        regs = [(A, B, wj), (B, A, wj)]
    else:
        raise ValueError(f"unknown adjacency configuration {case!r}")
    return _stack(regs)


# --------------------------------------------------------------------------- #
# Basis                                                                       #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class BasisSpec:
    """Conforming discrete space on a mesh.

    Attributes
    ----------
    kind : str
        ``"piecewise_constant"`` (one function per panel) or
        ``"piecewise_linear_zero_boundary"`` (hats at interior vertices).
    mesh : ScreenPanelMesh
    """

    kind: str
    mesh: ScreenPanelMesh

    def __post_init__(self):
        if self.kind not in (PIECEWISE_CONSTANT, PIECEWISE_LINEAR):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    @property
    def dofs(self) -> np.ndarray:
        """Panel indices (P0) or interior vertex indices (P1)."""
        if self.kind == PIECEWISE_CONSTANT:
            return np.arange(self.mesh.n_panels)
        return self.mesh.interior_vertices()

    @property
    def dimension(self) -> int:
        return int(len(self.dofs))

    def vertex_dof_map(self) -> np.ndarray:
        """Vertex index -> basis index, -1 for excluded vertices (P1 only)."""
        dof = -np.ones(self.mesh.n_vertices, dtype=np.int64)
        dof[self.dofs] = np.arange(self.dimension)
        return dof


def shape_gradients(mesh: ScreenPanelMesh) -> np.ndarray:
    """In-plane gradients of the nodal shape functions, shape (P, n, n-1)."""
    c = mesh.panel_coords()
    if mesh.dimension == 2:
        d = c[:, 1, 0] - c[:, 0, 0]
        return np.stack([-1.0 / d, 1.0 / d], axis=1)[:, :, None]
    e1 = c[:, 1, :2] - c[:, 0, :2]
    e2 = c[:, 2, :2] - c[:, 0, :2]
    J = np.stack([e1, e2], axis=1)  # rows e1, e2
    Jinv = np.linalg.inv(J)  # columns are grad lam1, grad lam2
    g1, g2 = Jinv[:, :, 0], Jinv[:, :, 1]
    return np.stack([-(g1 + g2), g1, g2], axis=1)


# --------------------------------------------------------------------------- #
# Public quadrature routines                                                  #
# --------------------------------------------------------------------------- #
def _map_triangle(P, pts):
    P = np.asarray(P, dtype=float)
    s = np.stack([1.0 - pts[:, 0], pts[:, 0] - pts[:, 1], pts[:, 1]], axis=1)
    return s @ P, s


def _area(P):
    P = np.asarray(P, dtype=float)
    e1, e2 = P[1] - P[0], P[2] - P[0]
    if len(e1) == 2:
        return 0.5 * abs(e1[0] * e2[1] - e1[1] * e2[0])
    return 0.5 * np.linalg.norm(np.cross(e1, e2))


def quad_regular(panel_x, panel_y, integrand: Callable, order: int) -> complex:
    """Tensor Gauss-Legendre rule for a smooth integrand over a panel pair.

    Parameters
    ----------
    panel_x, panel_y : array_like
        Segments given as ``(a, b)`` (1D coordinates) or triangles as
        (3, d) vertex arrays.
    integrand : callable
        ``f(x, y)`` on arrays of points, returns values per point.
    order : int
        Gauss points per coordinate.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    px = np.asarray(panel_x, dtype=float)
    py = np.asarray(panel_y, dtype=float)
    if px.ndim == 1:
        g, w = gauss01(order)
        x = px[0] + (px[1] - px[0]) * g
        y = py[0] + (py[1] - py[0]) * g
        X, Y = np.meshgrid(x, y, indexing="ij")
        W = np.outer(w, w) * abs(px[1] - px[0]) * abs(py[1] - py[0])
        return complex(np.sum(W * integrand(X.ravel(), Y.ravel()).reshape(W.shape)))
    tp, tw = triangle_rule(order)
    x, _ = _map_triangle(px, tp)
    y, _ = _map_triangle(py, tp)
    X = np.repeat(x, len(y), axis=0)
    Y = np.tile(y, (len(x), 1))
    W = np.outer(tw, tw).ravel() * 4.0 * _area(px) * _area(py)
    return complex(np.sum(W * integrand(X, Y)))


def _shared(px, py):
    pairs = []
    for a in range(3):
        for b in range(3):
            if np.allclose(px[a], py[b], rtol=0, atol=1e-12 * (1 + np.abs(px).max())):
                pairs.append((a, b))
    return pairs


def _quad_ss(px, py, integrand, order, case):
    xs, ys, ws = sauter_schwab_rule(case, int(order))
    x, _ = _map_triangle(px, xs)
    y, _ = _map_triangle(py, ys)
    return complex(np.sum(ws * integrand(x, y)) * 4.0 * _area(px) * _area(py))


def quad_coincident(panel, integrand: Callable, order: int = 8) -> complex:
    """Self-interaction of a triangle with a 1/r-type singular integrand."""
    P = np.asarray(panel, dtype=float)
    if P.shape[0] != 3:
        raise ValueError("quad_coincident expects a triangle")
    return _quad_ss(P, P, integrand, order, "coincident")


def quad_edge_adjacent(panel_x, panel_y, integrand: Callable, order: int = 8) -> complex:
    """Triangles sharing exactly one edge."""
    px, py = np.asarray(panel_x, float), np.asarray(panel_y, float)
    sh = _shared(px, py)
    if len(sh) != 2:
        raise ValueError(f"unknown adjacency configuration: {len(sh)} shared vertices, expected 2")
    (a0, b0), (a1, b1) = sh
    pa = [a0, a1, 3 - a0 - a1]
    pb = [b0, b1, 3 - b0 - b1]
    return _quad_ss(px[pa], py[pb], integrand, order, "edge")


def quad_vertex_adjacent(panel_x, panel_y, integrand: Callable, order: int = 8) -> complex:
    """Triangles sharing exactly one vertex."""
    px, py = np.asarray(panel_x, float), np.asarray(panel_y, float)
    sh = _shared(px, py)
    if len(sh) != 1:
        raise ValueError(f"unknown adjacency configuration: {len(sh)} shared vertices, expected 1")
    a, b = sh[0]
    pa = [(a + i) % 3 for i in range(3)]
    pb = [(b + i) % 3 for i in range(3)]
    return _quad_ss(px[pa], py[pb], integrand, order, "vertex")


def _g2(z):
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 0.5 * z * z * np.log(np.abs(z)) - 0.75 * z * z
    return np.where(z == 0.0, 0.0, out)


def log_pair_integral(a: float, b: float, c: float, d: float) -> float:
    """Closed form of int_a^b int_c^d ln|x - y| dy dx."""
    return float(_g2(b - c) - _g2(a - c) - _g2(b - d) + _g2(a - d))


# --------------------------------------------------------------------------- #
# Pair blocks                                                                 #
# --------------------------------------------------------------------------- #
def _pair_chunks(P: int, chunk: int = _CHUNK_PAIRS):
    """Yield arrays (pp, qq) enumerating q >= p in row-major order."""
    p0 = 0
    while p0 < P:
        rows, count = [], 0
        p1 = p0
        while p1 < P and (count == 0 or count + (P - p1) <= chunk):
            count += P - p1
            p1 += 1
        pp = np.concatenate([np.full(P - p, p, dtype=np.int64) for p in range(p0, p1)])
        qq = np.concatenate([np.arange(p, P, dtype=np.int64) for p in range(p0, p1)])
        yield pp, qq
        p0 = p1


def _geometry3d(mesh):
    c = mesh.panel_coords()[:, :, :2]
    cent = c.mean(axis=1)
    rad = np.max(np.linalg.norm(c - cent[:, None, :], axis=2), axis=1)
    return (np.ascontiguousarray(mesh.vertices[:, :2]), cent, rad,
            mesh.panel_diameters())


def pair_blocks(mesh: ScreenPanelMesh, k: float, quad: QuadSpec | None = None,
                pairs=None):
    """Yield (pp, qq, blocks, classes) for panel pairs ``q >= p``.

    ``blocks[m, a, b] = int_pp int_qq Phi phi_a phi_b`` in the panels'
    own local vertex order.  ``pairs`` may give explicit (pp, qq) arrays.
    """
    quad = quad or QuadSpec()
    k = float(k)
    if not k > 0:
        raise ValueError("wavenumber must be > 0")
    chunks = [pairs] if pairs is not None else _pair_chunks(mesh.n_panels)
    if mesh.dimension == 2:
        X = np.ascontiguousarray(mesh.panel_coords()[:, :, 0])
        gx, gw = gauss01(quad.line)
        hx, hw = gauss01(quad.graded)
        for pp, qq in chunks:
            pp = np.ascontiguousarray(pp, dtype=np.int64)
            qq = np.ascontiguousarray(qq, dtype=np.int64)
            out = np.empty((pp.size, 2, 2), dtype=np.complex128)
            K.blocks2d(pp, qq, X, k, gx, gw, hx, hw, K._VINV, out)
            yield pp, qq, out, None
        return
    V, cent, rad, diam = _geometry3d(mesh)
    T = np.ascontiguousarray(mesh.panels)
    rules = []
    for n in (quad.far, quad.regular, quad.near):
        rules += list(triangle_rule(n))
    for case in ("coincident", "edge", "vertex"):
        rules += list(sauter_schwab_rule(case, quad.singular))
    for pp, qq in chunks:
        pp = np.ascontiguousarray(pp, dtype=np.int64)
        qq = np.ascontiguousarray(qq, dtype=np.int64)
        out = np.empty((pp.size, 3, 3), dtype=np.complex128)
        cls = np.empty(pp.size, dtype=np.int64)
        K.blocks3d(pp, qq, V, T, cent, rad, diam, k, float(quad.far_ratio), *rules, out, cls)
        yield pp, qq, out, cls


def _check_finite(pp, qq, blocks):
    bad = ~np.isfinite(blocks.reshape(len(blocks), -1)).all(axis=1)
    if bad.any():
        m = int(np.flatnonzero(bad)[0])
        raise QuadratureError(f"non-finite quadrature for panel pair ({pp[m]}, {qq[m]})")


# --------------------------------------------------------------------------- #
# Systems                                                                     #
# --------------------------------------------------------------------------- #
@dataclass(frozen=True, eq=False)
class GalerkinSystem:
    """Assembled Galerkin matrix.

    Attributes
    ----------
    problem : str
        ``"soft"`` or ``"hard"``.
    matrix : ndarray of complex, shape (N, N)
    basis : BasisSpec
    k : float
    quad : QuadSpec
    pair_counts : dict
        Number of panel pairs per quadrature class (n = 3).
    """

    problem: str
    matrix: np.ndarray
    basis: BasisSpec
    k: float
    quad: QuadSpec
    pair_counts: dict = field(default_factory=dict)

    def symmetry_defect(self) -> float:
        """max|A - A^T| / max|A|."""
        A = self.matrix
        m = np.abs(A).max()
        return float(np.abs(A - A.T).max() / m) if m > 0 else 0.0


def _count(acc, cls):
    if cls is None:
        return
    for i, name in enumerate(PAIR_CLASSES):
        acc[name] = acc.get(name, 0) + int(np.count_nonzero(cls == i))


def assemble_single_layer(mesh: ScreenPanelMesh, k: float,
                          quad: QuadSpec | None = None) -> GalerkinSystem:
    """Galerkin matrix of the single-layer form for piecewise constants.

    Raises
    ------
    ValueError
        Empty mesh or invalid wavenumber.
    QuadratureError
        Non-finite entry (the offending panel pair is named).
    """
    quad = quad or QuadSpec()
    if mesh.n_panels == 0:
        raise ValueError("mesh has no panels")
    P = mesh.n_panels
    A = np.zeros((P, P), dtype=np.complex128)
    counts: dict = {}
    for pp, qq, blocks, cls in pair_blocks(mesh, k, quad):
        _check_finite(pp, qq, blocks)
        K.scatter_p0(A, pp, qq, blocks)
        _count(counts, cls)
    log.debug("single layer: %d panels, pair classes %s", P, counts)
    return GalerkinSystem("soft", A, BasisSpec(PIECEWISE_CONSTANT, mesh), float(k), quad, counts)


def assemble_hypersingular(mesh: ScreenPanelMesh, k: float,
                           quad: QuadSpec | None = None) -> GalerkinSystem:
    """Galerkin matrix of the hypersingular form for interior hat functions.

    Raises
    ------
    EmptyBasisError
        The mesh has no interior vertices (the discrete space is {0}).
    """
    quad = quad or QuadSpec()
    basis = BasisSpec(PIECEWISE_LINEAR, mesh)
    N = basis.dimension
    if N == 0:
        raise EmptyBasisError("no interior vertices: the hat-function space is {0}")
    dof = basis.vertex_dof_map()
    grads = np.ascontiguousarray(shape_gradients(mesh))
    T = np.ascontiguousarray(mesh.panels)
    # only panels touching a degree of freedom contribute
    active = np.flatnonzero((dof[T] >= 0).any(axis=1))
    A = np.zeros((N, N), dtype=np.complex128)
    counts: dict = {}
    for pp, qq in _pair_chunks(len(active)):
        pairs = (active[pp], active[qq])
        for p2, q2, blocks, cls in pair_blocks(mesh, k, quad, pairs=pairs):
            _check_finite(p2, q2, blocks)
            K.scatter_hyper(A, p2, q2, blocks, T, grads, dof, float(k) ** 2)
            _count(counts, cls)
    log.debug("hypersingular: %d dofs, pair classes %s", N, counts)
    return GalerkinSystem("hard", A, basis, float(k), quad, counts)


def assemble(problem: str, mesh: ScreenPanelMesh, k: float,
             quad: QuadSpec | None = None) -> GalerkinSystem:
    if problem == "soft":
        return assemble_single_layer(mesh, k, quad)
    if problem == "hard":
        return assemble_hypersingular(mesh, k, quad)
    raise ValueError(f"problem must be 'soft' or 'hard', got {problem!r}")


def dump_matrix(system: GalerkinSystem, path, fmt: str = "json") -> None:
    """Write the matrix row-major as [re, im] pairs (JSON) or raw complex128.

    Binary layout: little-endian int64 rows, int64 cols, then rows*cols
    complex128 values (re, im interleaved) in row-major order.
    """
    import json

    A = np.ascontiguousarray(system.matrix)
    if fmt == "json":
        data = {"problem": system.problem, "k": system.k, "shape": list(A.shape),
                "layout": "row-major [re, im]",
                "data": [[float(v.real), float(v.imag)] for v in A.ravel()]}
        with open(path, "w") as fh:
            json.dump(data, fh)
    elif fmt == "bin":
        with open(path, "wb") as fh:
            fh.write(np.array(A.shape, dtype="<i8").tobytes())
            fh.write(A.astype("<c16").tobytes())
    else:
        raise ValueError("fmt must be 'json' or 'bin'")

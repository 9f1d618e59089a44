"""
Layer potentials, scattered and far fields.

Densities are passed as nodal values per panel, shape (P, n): a piecewise
constant repeats its value, a hat expansion stores vertex values.

Conventions::

    S phi(x) = int_Gamma Phi(x, y) phi(y) ds(y)
    D psi(x) = int_Gamma d Phi(x, y)/d n(y) psi(y) ds(y),   n = e_n
    soft:  u^s = -S [d_n u]        hard:  u^s = D [u]

Jumps across the screen (top minus bottom) are ``[d_n S phi] = -phi`` and
``[D psi] = psi``.

Far field: ``u^s(c + r xhat) ~ pre(r) F(xhat)`` about a reference point c with
``pre = exp(i k r)/(4 pi r)`` (n = 3) and
``pre = (i/4) sqrt(2/(pi k r)) exp(i(k r - pi/4))`` (n = 2).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .assembly import gauss01, triangle_rule
from .geometry import ScreenPanelMesh
from .specialfn import (
    SERIES_SWITCH,
    _asymptotic01,
    _check_kn,
    _series01,
    dphi_dr_over_r_scalar,
    phi2_remainder_scalar,
    phi_scalar,
)

_INV_2PI = 1.0 / (2.0 * math.pi)
SLP, DLP = 0, 1
NEAR_FRACTION = 0.1  # points closer than this times h to a panel are tagged
FAR_FIELD_CONVENTION = {
    2: "u^s(origin + r xhat) ~ (i/4) sqrt(2/(pi k r)) exp(i(k r - pi/4)) F(xhat)",
    3: "u^s(origin + r xhat) ~ exp(i k r)/(4 pi r) F(xhat)",
}


# --------------------------------------------------------------------------- #
# 2D kernels                                                                  #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _g2_remainder(r, k):
    """g(r) - 1/(2 pi r^2) for n = 2, from the series without cancellation."""
    z = k * r
    if z > SERIES_SWITCH:
        h0, h1 = _asymptotic01(z)
        return 0.25j * k * h1 / r - _INV_2PI / (r * r)
    j0, j1, s0, s1 = _series01(z)
    return (0.25j * k * j1 - k * _INV_2PI * math.log(0.5 * z) * j1
            + k * s1 / (4.0 * math.pi)) / r


@njit(cache=True)
def _a0(u, z):
    # int 0.5 ln(u^2 + z^2) du
    s = u * u + z * z
    if s == 0.0:
        return 0.0
    v = 0.5 * u * math.log(s) - u
    if z != 0.0:
        v += abs(z) * math.atan(u / abs(z))
    return v


@njit(cache=True)
def _a1(u, z):
    # int 0.5 u ln(u^2 + z^2) du
    s = u * u + z * z
    if s == 0.0:
        return 0.0
    return 0.25 * (s * math.log(s) - u * u)


@njit(cache=True)
def _rem2(u, z, k, kind):
    r = math.sqrt(u * u + z * z)
    if kind == SLP:
        return phi2_remainder_scalar(r, k)
    return _g2_remainder(r, k) * z


@njit(cache=True)
def _graded(anchor, far, z, c0, c1, k, kind, gx, gw):
    """Integrate the smooth remainder times (c0 + c1 u) on [anchor, far] or
    [far, anchor], grading geometrically toward ``anchor``."""
    span = far - anchor
    if span == 0.0:
        return 0.0j
    stop = max(0.5 * math.sqrt(anchor * anchor + z * z), 1e-10 * abs(span))
    acc = 0.0j
    t_hi = 1.0
    while True:
        t_lo = 0.25 * t_hi if abs(span) * t_hi > stop else 0.0
        a = anchor + span * t_lo
        b = anchor + span * t_hi
        for i in range(gx.size):
            u = a + (b - a) * gx[i]
            acc += gw[i] * (b - a) * _rem2(u, z, k, kind) * (c0 + c1 * u)
        if t_lo == 0.0:
            break
        t_hi = t_lo
    return acc


@njit(cache=True)
def _seg_near(x1, z, xa, xb, fa, fb, k, kind, gx, gw):
    if xb < xa:
        xa, xb = xb, xa
        fa, fb = fb, fa
    c1 = (fb - fa) / (xb - xa)
    c0 = fa + c1 * (x1 - xa)
    ua = xa - x1
    ub = xb - x1
    if kind == SLP:
        sing = -_INV_2PI * (c0 * (_a0(ub, z) - _a0(ua, z)) + c1 * (_a1(ub, z) - _a1(ua, z)))
    elif z != 0.0:
        sing = _INV_2PI * (c0 * (math.atan(ub / z) - math.atan(ua / z))
                           + c1 * 0.5 * z * (math.log(ub * ub + z * z) - math.log(ua * ua + z * z)))
    else:
        sing = 0.0j
    if ua < 0.0 < ub:
        rem = _graded(0.0, ub, z, c0, c1, k, kind, gx, gw) - _graded(0.0, ua, z, c0, c1, k, kind, gx, gw)
    elif ua >= 0.0:
        rem = _graded(ua, ub, z, c0, c1, k, kind, gx, gw)
    else:
        rem = -_graded(ub, ua, z, c0, c1, k, kind, gx, gw)
    return sing + rem


@njit(cache=True)
def _seg_regular(x1, z, xa, xb, fa, fb, k, kind, gx, gw):
    L = abs(xb - xa)
    acc = 0.0j
    for i in range(gx.size):
        y = xa + (xb - xa) * gx[i]
        r = math.sqrt((x1 - y) ** 2 + z * z)
        f = fa + (fb - fa) * gx[i]
        if kind == SLP:
            kv = phi_scalar(r, k, 2)
        else:
            kv = dphi_dr_over_r_scalar(r, k, 2) * z
        acc += gw[i] * kv * f
    return acc * L


@njit(parallel=True, cache=True)
def _eval2d(pts, X, F, k, kind, gx_reg, gw_reg, gx, gw, near_tol, out, near):
    M = pts.shape[0]
    P = X.shape[0]
    for m in prange(M):
        x1 = pts[m, 0]
        z = pts[m, 1]
        acc = 0.0j
        tag = False
        for p in range(P):
            xa = X[p, 0]
            xb = X[p, 1]
            lo = min(xa, xb)
            hi = max(xa, xb)
            dx = 0.0
            if x1 < lo:
                dx = lo - x1
            elif x1 > hi:
                dx = x1 - hi
            dist = math.sqrt(dx * dx + z * z)
            if dist < near_tol:
                tag = True
            if dist < hi - lo:
                acc += _seg_near(x1, z, xa, xb, F[p, 0], F[p, 1], k, kind, gx, gw)
            else:
                acc += _seg_regular(x1, z, xa, xb, F[p, 0], F[p, 1], k, kind, gx_reg, gw_reg)
        out[m] = acc
        near[m] = tag


# --------------------------------------------------------------------------- #
# 3D kernels                                                                  #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _tri_rule(x, Y, f, k, kind, tp, tw):
    # Y: (3, 2) in-plane vertices, f: (3,) nodal values
    e1x = Y[1, 0] - Y[0, 0]
    e1y = Y[1, 1] - Y[0, 1]
    e2x = Y[2, 0] - Y[0, 0]
    e2y = Y[2, 1] - Y[0, 1]
    jac = abs(e1x * e2y - e1y * e2x)
    z = x[2]
    acc = 0.0j
    for i in range(tw.size):
        s1 = tp[i, 0]
        s2 = tp[i, 1]
        l0 = 1.0 - s1
        l1 = s1 - s2
        l2 = s2
        yx = l0 * Y[0, 0] + l1 * Y[1, 0] + l2 * Y[2, 0]
        yy = l0 * Y[0, 1] + l1 * Y[1, 1] + l2 * Y[2, 1]
        r = math.sqrt((x[0] - yx) ** 2 + (x[1] - yy) ** 2 + z * z)
        fv = l0 * f[0] + l1 * f[1] + l2 * f[2]
        if kind == SLP:
            kv = phi_scalar(r, k, 3)
        else:
            kv = dphi_dr_over_r_scalar(r, k, 3) * z
        acc += tw[i] * kv * fv
    return acc * jac


@njit(cache=True)
def _tri_adaptive(x, Y0, f0, k, kind, t_lo, w_lo, t_mid, w_mid, t_hi, w_hi, max_depth):
    """Red-refine around x until each piece is well separated from it."""
    cx = (Y0[0, 0] + Y0[1, 0] + Y0[2, 0]) / 3.0
    cy = (Y0[0, 1] + Y0[1, 1] + Y0[2, 1]) / 3.0
    diam = max(math.hypot(Y0[0, 0] - Y0[1, 0], Y0[0, 1] - Y0[1, 1]),
               math.hypot(Y0[1, 0] - Y0[2, 0], Y0[1, 1] - Y0[2, 1]),
               math.hypot(Y0[2, 0] - Y0[0, 0], Y0[2, 1] - Y0[0, 1]))
    if math.sqrt((x[0] - cx) ** 2 + (x[1] - cy) ** 2 + x[2] * x[2]) >= 8.0 * diam:
        return _tri_rule(x, Y0, f0, k, kind, t_lo, w_lo)
    S = 3 * max_depth + 4
    Ys = np.empty((S, 3, 2))
    Fs = np.empty((S, 3), dtype=np.complex128)
    Ds = np.empty(S, dtype=np.int64)
    Ys[0] = Y0
    Fs[0] = f0
    Ds[0] = 0
    top = 1
    acc = 0.0j
    while top > 0:
        top -= 1
        Y = Ys[top].copy()
        f = Fs[top].copy()
        d = Ds[top]
        cx = (Y[0, 0] + Y[1, 0] + Y[2, 0]) / 3.0
        cy = (Y[0, 1] + Y[1, 1] + Y[2, 1]) / 3.0
        diam = 0.0
        for a in range(3):
            b = (a + 1) % 3
            diam = max(diam, math.hypot(Y[a, 0] - Y[b, 0], Y[a, 1] - Y[b, 1]))
        dist = math.sqrt((x[0] - cx) ** 2 + (x[1] - cy) ** 2 + x[2] * x[2])
        if dist >= 8.0 * diam:
            acc += _tri_rule(x, Y, f, k, kind, t_lo, w_lo)
        elif dist >= 3.0 * diam:
            acc += _tri_rule(x, Y, f, k, kind, t_mid, w_mid)
        elif d >= max_depth:
            acc += _tri_rule(x, Y, f, k, kind, t_hi, w_hi)
        else:
            M = np.empty((3, 2))
            g = np.empty(3, dtype=np.complex128)
            for a in range(3):
                b = (a + 1) % 3
                M[a, 0] = 0.5 * (Y[a, 0] + Y[b, 0])
                M[a, 1] = 0.5 * (Y[a, 1] + Y[b, 1])
                g[a] = 0.5 * (f[a] + f[b])
            # corner children: (Y0, M0, M2), (M0, Y1, M1), (M2, M1, Y2); centre (M0, M1, M2)
            for c in range(4):
                if c == 0:
                    Ys[top, 0] = Y[0]; Ys[top, 1] = M[0]; Ys[top, 2] = M[2]
                    Fs[top, 0] = f[0]; Fs[top, 1] = g[0]; Fs[top, 2] = g[2]
                elif c == 1:
                    Ys[top, 0] = M[0]; Ys[top, 1] = Y[1]; Ys[top, 2] = M[1]
                    Fs[top, 0] = g[0]; Fs[top, 1] = f[1]; Fs[top, 2] = g[1]
                elif c == 2:
                    Ys[top, 0] = M[2]; Ys[top, 1] = M[1]; Ys[top, 2] = Y[2]
                    Fs[top, 0] = g[2]; Fs[top, 1] = g[1]; Fs[top, 2] = f[2]
                else:
                    Ys[top, 0] = M[0]; Ys[top, 1] = M[1]; Ys[top, 2] = M[2]
                    Fs[top, 0] = g[0]; Fs[top, 1] = g[1]; Fs[top, 2] = g[2]
                Ds[top] = d + 1
                top += 1
    return acc


@njit(cache=True)
def _point_triangle_distance(x, Y):
    """Distance from x to the planar triangle Y (z = 0)."""
    px, py = x[0], x[1]
    e1x = Y[1, 0] - Y[0, 0]
    e1y = Y[1, 1] - Y[0, 1]
    e2x = Y[2, 0] - Y[0, 0]
    e2y = Y[2, 1] - Y[0, 1]
    det = e1x * e2y - e1y * e2x
    qx = px - Y[0, 0]
    qy = py - Y[0, 1]
    a = (qx * e2y - qy * e2x) / det
    b = (e1x * qy - e1y * qx) / det
    if a >= 0.0 and b >= 0.0 and a + b <= 1.0:
        d2 = 0.0
    else:
        d2 = 1e300
        for i in range(3):
            j = (i + 1) % 3
            sx = Y[j, 0] - Y[i, 0]
            sy = Y[j, 1] - Y[i, 1]
            L2 = sx * sx + sy * sy
            t = ((px - Y[i, 0]) * sx + (py - Y[i, 1]) * sy) / L2
            t = min(1.0, max(0.0, t))
            dx = px - Y[i, 0] - t * sx
            dy = py - Y[i, 1] - t * sy
            d2 = min(d2, dx * dx + dy * dy)
    return math.sqrt(d2 + x[2] * x[2])


@njit(parallel=True, cache=True)
def _eval3d(pts, C, F, k, kind, t_lo, w_lo, t_mid, w_mid, t_hi, w_hi, max_depth, near_tol, out, near):
    M = pts.shape[0]
    P = C.shape[0]
    for m in prange(M):
        x = pts[m]
        acc = 0.0j
        tag = False
        for p in range(P):
            Y = C[p]
            if near_tol > 0.0 and not tag:
                if _point_triangle_distance(x, Y) < near_tol:
                    tag = True
            acc += _tri_adaptive(x, Y, F[p], k, kind, t_lo, w_lo, t_mid, w_mid, t_hi, w_hi, max_depth)
        out[m] = acc
        near[m] = tag


# --------------------------------------------------------------------------- #
# Public evaluation                                                           #
# --------------------------------------------------------------------------- #
def _nodal(mesh: ScreenPanelMesh, values) -> np.ndarray:
    v = np.asarray(values, dtype=complex)
    if v.ndim == 1:
        if len(v) != mesh.n_panels:
            raise ValueError("piecewise-constant density needs one value per panel")
        v = np.repeat(v[:, None], mesh.dimension, axis=1)
    if v.shape != (mesh.n_panels, mesh.dimension):
        raise ValueError(f"density must have shape ({mesh.n_panels}, {mesh.dimension})")
    return np.ascontiguousarray(v)


def _on_screen(mesh: ScreenPanelMesh, pts: np.ndarray) -> np.ndarray:
    """Points of the plane x_n = 0 lying in a closed panel."""
    hit = np.zeros(len(pts), dtype=bool)
    idx = np.flatnonzero(pts[:, -1] == 0.0)
    if len(idx) == 0:
        return hit
    c = mesh.panel_coords()
    tol = 1e-14 * max(mesh.diameter(), 1.0)
    for i in idx:
        if mesh.dimension == 2:
            lo, hi = c[:, :, 0].min(axis=1), c[:, :, 0].max(axis=1)
            hit[i] = np.any((lo - tol <= pts[i, 0]) & (pts[i, 0] <= hi + tol))
        else:
            a, b, d = c[:, 0, :2], c[:, 1, :2], c[:, 2, :2]
            x = pts[i, :2]

            def side(p, q):
                return (q[:, 0] - p[:, 0]) * (x[1] - p[:, 1]) - (q[:, 1] - p[:, 1]) * (x[0] - p[:, 0])

            s1, s2, s3 = side(a, b), side(b, d), side(d, a)
            inside = ((s1 >= -tol) & (s2 >= -tol) & (s3 >= -tol)) | ((s1 <= tol) & (s2 <= tol) & (s3 <= tol))
            hit[i] = np.any(inside)
    return hit


def _eval(mesh, values, k, points, kind):
    _check_kn(k, mesh.dimension)
    n = mesh.dimension
    pts = np.ascontiguousarray(np.asarray(points, dtype=float).reshape(-1, n))
    if not np.all(np.isfinite(pts)):
        raise ValueError("evaluation points must be finite")
    F = _nodal(mesh, values)
    if mesh.n_panels and np.any(_on_screen(mesh, pts)):
        raise ValueError("evaluation point lies on a panel of the screen")
    out = np.zeros(len(pts), dtype=np.complex128)
    near = np.zeros(len(pts), dtype=np.bool_)
    if mesh.n_panels == 0 or len(pts) == 0:
        return out, near
    near_tol = NEAR_FRACTION * mesh.h
    if n == 2:
        X = np.ascontiguousarray(mesh.panel_coords()[:, :, 0])
        gr, wr = gauss01(10)
        gx, gw = gauss01(8)
        _eval2d(pts, X, F, float(k), kind, gr, wr, gx, gw, near_tol, out, near)
    else:
        C = np.ascontiguousarray(mesh.panel_coords()[:, :, :2])
        t_lo, w_lo = triangle_rule(4)
        t_mid, w_mid = triangle_rule(8)
        t_hi, w_hi = triangle_rule(16)
        _eval3d(pts, C, F, float(k), kind, t_lo, w_lo, t_mid, w_mid, t_hi, w_hi,
                24, near_tol, out, near)
    return out, near


def eval_single_layer(mesh: ScreenPanelMesh, values, k: float, points, return_flags: bool = False):
    """S phi at ``points`` (shape (M, n)).

    Parameters
    ----------
    values : array_like
        (P,) piecewise-constant values or (P, n) nodal values per panel.
    return_flags : bool
        Also return a boolean array marking points within 0.1 h of a panel.
    """
    out, near = _eval(mesh, values, k, points, SLP)
    return (out, near) if return_flags else out


def eval_double_layer(mesh: ScreenPanelMesh, values, k: float, points, return_flags: bool = False):
    """D psi at ``points`` with normal e_n; see :func:`eval_single_layer`."""
    out, near = _eval(mesh, values, k, points, DLP)
    return (out, near) if return_flags else out


def eval_single_layer_dn(mesh: ScreenPanelMesh, values, k: float, points, return_flags: bool = False):
    """d/dx_n of S phi: the same kernel as D with the opposite sign."""
    out, near = _eval(mesh, values, k, points, DLP)
    return (-out, near) if return_flags else -out


# --------------------------------------------------------------------------- #
# Fields                                                                      #
# --------------------------------------------------------------------------- #
def _fmt(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class FieldGrid:
    """Field values at sample points.

    ``near`` marks points within 0.1 h of a panel, where quadrature
    accuracy is reduced.
    """

    points: np.ndarray
    values: np.ndarray
    near: np.ndarray
    label: str = "scattered"
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "meta": self.meta,
            "points": self.points.tolist(),
            "values": [[float(v.real), float(v.imag)] for v in self.values],
            "near_screen": [bool(b) for b in self.near],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def write_csv(self, path) -> None:
        n = self.points.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i + 1}" for i in range(n)] + ["re", "im", "abs", "near_screen"])
            for p, v, b in zip(self.points, self.values, self.near):
                w.writerow([_fmt(c) for c in p] + [_fmt(v.real), _fmt(v.imag), _fmt(abs(v)), int(b)])


@dataclass(frozen=True, eq=False)
class FarFieldPattern:
    """Far-field pattern F at unit directions; see ``convention``."""

    directions: np.ndarray
    values: np.ndarray
    k: float
    convention: str
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "convention": self.convention,
            "k": self.k,
            "meta": self.meta,
            "directions": self.directions.tolist(),
            "values": [[float(v.real), float(v.imag)] for v in self.values],
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def write_csv(self, path) -> None:
        n = self.directions.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"d{i + 1}" for i in range(n)] + ["re", "im", "abs"])
            for d, v in zip(self.directions, self.values):
                w.writerow([_fmt(c) for c in d] + [_fmt(v.real), _fmt(v.imag), _fmt(abs(v))])


def scattered_field(solution, points) -> FieldGrid:
    """u^s at ``points``: -S[d_n u] (soft) or D[u] (hard)."""
    m = solution.mesh
    nodal = solution.nodal_values()
    if solution.problem == "soft":
        v, near = eval_single_layer(m, nodal, solution.k, points, return_flags=True)
        v = 0.0 - v  # no negative zeros for a zero density
    else:
        v, near = eval_double_layer(m, nodal, solution.k, points, return_flags=True)
    pts = np.asarray(points, dtype=float).reshape(-1, m.dimension)
    return FieldGrid(pts, v, near, "scattered",
                     {"problem": solution.problem, "k": solution.k, "mesh_hash": m.hash()})


def total_field(solution, points) -> FieldGrid:
    from .solve import incident_value

    s = scattered_field(solution, points)
    ui = incident_value(solution.field, s.points, solution.k)
    return FieldGrid(s.points, s.values + ui, s.near, "total", s.meta)


def directions_from_angles(angles, dimension: int = 2, azimuth: float = 0.0) -> np.ndarray:
    """Unit directions: (cos t, sin t) in 2D; in 3D the polar angle t from
    e_3 in the vertical plane at the given azimuth."""
    t = np.asarray(angles, dtype=float).ravel()
    if dimension == 2:
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    return np.stack([np.sin(t) * np.cos(azimuth), np.sin(t) * np.sin(azimuth), np.cos(t)], axis=1)


def far_field_prefactor(r, k: float, n: int):
    r = np.asarray(r, dtype=float)
    if n == 3:
        return np.exp(1j * k * r) / (4 * np.pi * r)
    return 0.25j * np.sqrt(2.0 / (np.pi * k * r)) * np.exp(1j * (k * r - np.pi / 4))


def far_field(solution, directions, origin=None, order: int = 8) -> FarFieldPattern:
    """Far-field pattern of the scattered field at unit ``directions``.

    soft: F = -int exp(-i k xhat.(y - c)) [d_n u] ds;
    hard: F = int (-i k xhat_n) exp(-i k xhat.(y - c)) [u] ds,

    so that ``u^s(c + r xhat) ~ pre(r) F(xhat)``.  The reference point
    ``c`` defaults to the centre of the mesh bounding box.
    """
    from .solve import panel_quadrature

    m = solution.mesh
    k = solution.k
    d = np.asarray(directions, dtype=float).reshape(-1, m.dimension)
    if len(d) == 0:
        raise ValueError("far_field needs at least one direction")
    if np.any(np.abs(np.linalg.norm(d, axis=1) - 1.0) > 1e-12):
        raise ValueError("far-field directions must be unit vectors")
    c = m.center() if origin is None else np.asarray(origin, dtype=float)
    pts, shape, wts = panel_quadrature(m, order)
    pts = pts - c
    dens = np.einsum("mv,pv->pm", shape, solution.nodal_values()) * wts  # (P, M)
    ph = np.exp(-1j * k * np.einsum("dn,pmn->dpm", d, pts))
    F = np.einsum("dpm,pm->d", ph, dens)
    F = -F if solution.problem == "soft" else (-1j * k * d[:, -1]) * F
    return FarFieldPattern(d, F, k, FAR_FIELD_CONVENTION[m.dimension],
                           {"problem": solution.problem, "mesh_hash": m.hash(),
                            "origin": c.tolist()})


# --------------------------------------------------------------------------- #
# Diagnostics                                                                 #
# --------------------------------------------------------------------------- #
JUMP_OFFSETS = (1e-2, 5e-3, 2.5e-3)  # times the screen diameter


def _richardson(vals, eps):
    """First-order extrapolation to eps = 0 from the two smallest offsets."""
    e1, e2 = eps[-2], eps[-1]
    return (e1 * vals[-1] - e2 * vals[-2]) / (e1 - e2)


def _rel(a, b, scale):
    return float(np.abs(np.asarray(a) - np.asarray(b)).max() / scale)


def jump_check(mesh: ScreenPanelMesh, values, k: float, layer: str = "single",
               offsets=JUMP_OFFSETS) -> dict:
    """One-sided limits of a layer potential at panel midpoints.

    Evaluates at ``x +- eps e_n`` for each ``eps`` in ``offsets`` (times the
    screen diameter) and extrapolates to eps = 0.

    single: d_n+- S phi against -+phi/2, and [S phi] against 0.
    double: gamma+- D psi against +-psi/2, and [d_n D psi] against 0
    (central differences with step eps/4).

    Errors are max-norm errors divided by max|density|/2.
    """
    n = mesh.dimension
    F = _nodal(mesh, values)
    pts = mesh.centroids()
    dens = F.mean(axis=1)
    N = len(pts)
    en = np.zeros(n)
    en[-1] = 1.0
    eps = np.sort(np.asarray(offsets, dtype=float))[::-1] * mesh.diameter()
    plus, minus, zero_jump = [], [], []
    for e in eps:
        if layer == "single":
            both = np.vstack([pts + e * en, pts - e * en])
            d = eval_single_layer_dn(mesh, F, k, both)
            v = eval_single_layer(mesh, F, k, both)
            plus.append(d[:N])
            minus.append(d[N:])
            zero_jump.append(v[:N] - v[N:])
        elif layer == "double":
            s = 0.25 * e
            z = np.concatenate([[e, -e, e + s, e - s, -e + s, -e - s]])
            allp = np.vstack([pts + zz * en for zz in z])
            v = eval_double_layer(mesh, F, k, allp).reshape(6, N)
            plus.append(v[0])
            minus.append(v[1])
            zero_jump.append((v[2] - v[3]) / (2 * s) - (v[4] - v[5]) / (2 * s))
        else:
            raise ValueError("layer must be 'single' or 'double'")
    p, m_ = _richardson(plus, eps), _richardson(minus, eps)
    scale = max(0.5 * np.abs(dens).max(), 1e-300)
    sgn = -1.0 if layer == "single" else 1.0
    return {
        "layer": layer,
        "offsets": eps.tolist(),
        "plus_error": _rel(p, sgn * 0.5 * dens, scale),
        "minus_error": _rel(m_, -sgn * 0.5 * dens, scale),
        "zero_jump": _rel(zero_jump[-1], 0.0, scale),
        "plus": p,
        "minus": m_,
        "density": dens,
    }


def boundary_condition_check(solution, offsets=JUMP_OFFSETS) -> dict:
    """Extrapolated boundary values of the total field at panel midpoints.

    soft: |u^i + u^s| on the screen, relative to max|u^i|.
    hard: |d_n (u^i + u^s)| on the screen, relative to max|d_n u^i|.
    Both sides are checked.  ``error`` covers every panel,
    ``interior_error`` only panels without a boundary vertex (near the
    screen edge the hat space cannot follow the sqrt-type edge behaviour
    of [u], so the pointwise Neumann residual there grows as h -> 0).
    """
    from .solve import incident_normal_derivative, incident_value

    m = solution.mesh
    n, k = m.dimension, solution.k
    pts = m.centroids()
    N = len(pts)
    en = np.zeros(n)
    en[-1] = 1.0
    eps = np.sort(np.asarray(offsets, dtype=float))[::-1] * m.diameter()
    sides = {1.0: [], -1.0: []}
    for e in eps:
        for sd in (1.0, -1.0):
            z0 = sd * e
            if solution.problem == "soft":
                x = pts + z0 * en
                u = scattered_field(solution, x).values + incident_value(solution.field, x, k)
            else:
                s = 0.25 * e
                x = np.vstack([pts + (z0 + s) * en, pts + (z0 - s) * en])
                us = scattered_field(solution, x).values
                u = (us[:N] - us[N:]) / (2 * s) + incident_normal_derivative(solution.field, pts + z0 * en, k)
            sides[sd].append(u)
    if solution.problem == "soft":
        ref = np.abs(incident_value(solution.field, pts, k)).max()
    else:
        ref = max(np.abs(incident_normal_derivative(solution.field, pts, k)).max(), 1e-300)
    up = np.abs(_richardson(sides[1.0], eps))
    dn = np.abs(_richardson(sides[-1.0], eps))
    worst = np.maximum(up, dn) / ref
    inner = ~m.boundary[m.panels].any(axis=1)
    return {
        "problem": solution.problem,
        "offsets": eps.tolist(),
        "reference": float(ref),
        "plus_error": float(up.max() / ref),
        "minus_error": float(dn.max() / ref),
        "error": float(worst.max()),
        "interior_error": float(worst[inner].max()) if inner.any() else float("nan"),
        "per_panel": worst,
    }


def helmholtz_residual(solution, points, step: float) -> np.ndarray:
    """|Delta_h u^s + k^2 u^s| / |u^s| with the (2n+1)-point stencil."""
    pts = np.asarray(points, dtype=float).reshape(-1, solution.mesh.dimension)
    n = pts.shape[1]
    offs = [np.zeros(n)]
    for i in range(n):
        for s in (1.0, -1.0):
            o = np.zeros(n)
            o[i] = s * step
            offs.append(o)
    allp = np.concatenate([pts + o for o in offs])
    v = scattered_field(solution, allp).values.reshape(len(offs), len(pts))
    lap = (v[1:].sum(axis=0) - 2 * n * v[0]) / step**2
    return np.abs(lap + solution.k**2 * v[0]) / np.maximum(np.abs(v[0]), 1e-300)


def grid_points(lo, hi, shape) -> np.ndarray:
    """Tensor grid of points spanning the box [lo, hi] (inclusive)."""
    axes = [np.linspace(a, b, s) for a, b, s in zip(lo, hi, shape)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def observation_points(center, radius: float, count: int, dimension: int) -> np.ndarray:
    """``count`` points on a circle of the given radius about ``center``,
    at angles (i + 1/2) 2 pi / count; in 3D the circle lies in the
    x1-x3 plane."""
    t = (np.arange(count) + 0.5) * 2 * np.pi / count
    c = np.asarray(center, dtype=float)
    if dimension == 2:
        off = np.stack([np.cos(t), np.sin(t)], axis=1)
    else:
        off = np.stack([np.cos(t), np.zeros_like(t), np.sin(t)], axis=1)
    return c[None, :] + radius * off

"""
Independent brute-force oracles for the test suite.

Nothing here calls the package's quadrature or special-function code.

2D: the log part of Phi is integrated analytically in the inner variable,
the outer integral and the smooth remainder by scipy adaptive quadrature
(Hankel functions from scipy.special).

3D: inner integrals over a triangle in polar coordinates about the outer
point.  Each edge contributes a signed fan; the radial integral of
Phi(rho) rho is closed form and the angle is parametrised by
s = d sinh(w) along the edge, which removes the near-singularity of thin
fans.  The outer integral uses a product Gauss rule in collapsed coordinates,
graded toward the panel edges where the inner integral has its d ln d
behaviour.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

EULER = 0.57721566490153286061


# --------------------------------------------------------------------------- #
# Kernels                                                                     #
# --------------------------------------------------------------------------- #
def phi_ref(r, k, n):
    r = np.asarray(r, dtype=float)
    if n == 3:
        return np.exp(1j * k * r) / (4 * np.pi * r)
    return 0.25j * special.hankel1(0, k * r)


def remainder2d(r, k):
    """(i/4) H0(k r) + ln(r)/(2 pi), with its limit at r = 0."""
    r = np.asarray(r, dtype=float)
    out = np.empty(r.shape, dtype=complex)
    small = r < 1e-300
    out[small] = 0.25j - (math.log(0.5 * k) + EULER) / (2 * np.pi)
    rr = r[~small]
    out[~small] = 0.25j * special.hankel1(0, k * rr) + np.log(rr) / (2 * np.pi)
    return out


def _cquad(f, a, b, points=None, **kw):
    opts = dict(limit=400, epsabs=1e-15, epsrel=1e-13)
    opts.update(kw)
    if points is not None:
        points = [p for p in points if a < p < b] or None
    re = integrate.quad(lambda t: f(t).real, a, b, points=points, **opts)[0]
    im = integrate.quad(lambda t: f(t).imag, a, b, points=points, **opts)[0]
    return re + 1j * im


# --------------------------------------------------------------------------- #
# 2D pair moments                                                             #
# --------------------------------------------------------------------------- #
def _log_lin(s, c, d, alpha, beta):
    """int_c^d ln|t - s| (alpha + beta (t - s)) dt, closed form."""

    def F(u):
        au = abs(u)
        lu = math.log(au) if au > 0 else 0.0
        return alpha * (u * lu - u) + beta * (0.5 * u * u * lu - 0.25 * u * u)

    return F(d - s) - F(c - s)


def pair_moments_2d(x, y, k):
    """M[a, b] = int_X int_Y Phi(|s - t|) lam_a(s) mu_b(t) dt ds.

    ``x = (x0, x1)``, ``y = (y0, y1)``: segment endpoints on the line;
    local function 0 equals 1 at the first endpoint.
    """
    x0, x1 = x
    y0, y1 = y
    Lx, Ly = abs(x1 - x0), abs(y1 - y0)
    lo_y, hi_y = min(y0, y1), max(y0, y1)

    def lam(a, s):
        t = (s - x0) / (x1 - x0)
        return 1 - t if a == 0 else t

    M = np.zeros((2, 2), dtype=complex)
    for b in range(2):
        # mu_b(t) = alpha + beta (t - s)
        beta = (-1.0 if b == 0 else 1.0) / (y1 - y0)

        def inner_log(s, b=b, beta=beta):
            mu_s = (1 - (s - y0) / (y1 - y0)) if b == 0 else (s - y0) / (y1 - y0)
            return -_log_lin(s, lo_y, hi_y, mu_s, beta) / (2 * np.pi)

        for a in range(2):
            val = _cquad(lambda s: lam(a, s) * inner_log(s), min(x0, x1), max(x0, x1),
                         points=[lo_y, hi_y]) * Lx / Lx
            # smooth remainder on the parameter square
            def g(v, u, part):
                s = x0 + (x1 - x0) * u
                t = y0 + (y1 - y0) * v
                w = (1 - u if a == 0 else u) * (1 - v if b == 0 else v)
                z = remainder2d(np.array([abs(s - t)]), k)[0] * w * Lx * Ly
                return z.real if part == 0 else z.imag

            rem = [integrate.dblquad(g, 0, 1, 0, 1, args=(p,), epsabs=1e-15, epsrel=1e-12)[0]
                   for p in (0, 1)]
            M[a, b] = val + rem[0] + 1j * rem[1]
    return M


# --------------------------------------------------------------------------- #
# 3D pair moments                                                             #
# --------------------------------------------------------------------------- #
def _leg01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


_WX, _WW = _leg01(10)
_W_PIECES = 12


def _radial(R, k):
    """E0 = int_0^R e^{ik rho}/(4 pi) d rho,  E1 = int_0^R rho e^{ik rho}/(4 pi) d rho."""
    ikR = 1j * k * R
    e = np.exp(ikR)
    with np.errstate(divide="ignore", invalid="ignore"):
        E0 = (e - 1) / (1j * k)
        E1 = e * (R / (1j * k) + 1 / k**2) - 1 / k**2
    small = np.abs(k * R) < 0.5
    if np.any(small):
        Rs = R[small]
        z = 1j * k * Rs
        s0 = np.zeros_like(z)
        s1 = np.zeros_like(z)
        term = np.ones_like(z)  # (ik R)^m / m!
        for m in range(30):
            s0 += term / (m + 1)
            s1 += term / (m + 2)
            term = term * z / (m + 1)
        E0[small] = Rs * s0
        E1[small] = Rs**2 * s1
    return E0 / (4 * np.pi), E1 / (4 * np.pi)


def _gradients(Q):
    e1, e2 = Q[1] - Q[0], Q[2] - Q[0]
    J = np.array([e1, e2])
    Ji = np.linalg.inv(J)  # columns: grad lam1, grad lam2
    g1, g2 = Ji[:, 0], Ji[:, 1]
    return np.array([-(g1 + g2), g1, g2])


def _bary(Q, X):
    e1, e2 = Q[1] - Q[0], Q[2] - Q[0]
    J = np.array([e1, e2]).T
    st = np.linalg.solve(J, (X - Q[0]).T).T
    return np.stack([1 - st[:, 0] - st[:, 1], st[:, 0], st[:, 1]], axis=1)


def inner_3d(X, Q, k):
    """I[m, b] = int_Q Phi(|x_m - y|) lam_b(y) dy for in-plane points X (M, 2)."""
    X = np.atleast_2d(X)
    area2 = (Q[1, 0] - Q[0, 0]) * (Q[2, 1] - Q[0, 1]) - (Q[1, 1] - Q[0, 1]) * (Q[2, 0] - Q[0, 0])
    orient = np.sign(area2)
    lam_x = _bary(Q, X)  # (M, 3)
    grads = _gradients(Q)  # (3, 2)
    out = np.zeros((len(X), 3), dtype=complex)
    for e in range(3):
        a, b = Q[e], Q[(e + 1) % 3]
        L = np.linalg.norm(b - a)
        tau = (b - a) / L
        proj = (X - a) @ tau
        foot = a + proj[:, None] * tau
        v = foot - X
        d = np.linalg.norm(v, axis=1)
        ok = d > 1e-14 * L
        if not np.any(ok):
            continue
        Xo, fo, do, po = X[ok], foot[ok], d[ok], proj[ok]
        sgn = np.sign(v[ok, 0] * tau[1] - v[ok, 1] * tau[0])
        wa = np.arcsinh(-po / do)
        wb = np.arcsinh((L - po) / do)
        # composite Gauss in w
        edges = np.linspace(0, 1, _W_PIECES + 1)
        t = (edges[:-1, None] + np.diff(edges)[:, None] * _WX[None, :]).ravel()
        wt = (np.diff(edges)[:, None] * _WW[None, :]).ravel()
        w = wa[:, None] + (wb - wa)[:, None] * t[None, :]
        jac = (wb - wa)[:, None] * wt[None, :]
        s = do[:, None] * np.sinh(w)
        R = do[:, None] * np.cosh(w)
        P = fo[:, None, :] + s[:, :, None] * tau
        ev = (P - Xo[:, None, :]) / R[:, :, None]
        E0, E1 = _radial(R, k)
        base = jac / np.cosh(w)
        for bb in range(3):
            f = lam_x[ok, bb][:, None] * E0 + (ev @ grads[bb]) * E1
            out[ok, bb] += sgn * orient * np.sum(base * f, axis=1)
    return out


def _graded01(n, p=3):
    """Gauss rule on [0, 1] pushed toward both ends by t = x^p/(x^p + (1-x)^p)."""
    x, w = _leg01(n)
    d = x**p + (1 - x) ** p
    return x**p / d, w * p * x ** (p - 1) * (1 - x) ** (p - 1) / d**2


def pair_moments_3d(Tp, Tq, k, n=40, chunk=2000):
    """M[a, b] = int_Tp int_Tq Phi lam_a(x) mu_b(y) dy dx (in-plane triangles).

    Outer rule: collapsed product Gauss on Tp, graded toward u = 1 and
    v = 0, 1.  Those are the edges of Tp, and every singular feature of the
    inner integral inside Tp lies on its boundary for the pair types of a
    conforming mesh.
    """
    Tp = np.asarray(Tp, dtype=float)[:, :2]
    Tq = np.asarray(Tq, dtype=float)[:, :2]
    g, gw = _graded01(n)
    U, V = np.meshgrid(g, g, indexing="ij")
    W = (np.outer(gw, gw) * U).ravel()
    s, t = (U * (1 - V)).ravel(), (U * V).ravel()
    e1, e2 = Tp[1] - Tp[0], Tp[2] - Tp[0]
    area2 = abs(e1[0] * e2[1] - e1[1] * e2[0])
    X = Tp[0] + s[:, None] * e1 + t[:, None] * e2
    I = np.concatenate([inner_3d(X[i:i + chunk], Tq, k) for i in range(0, len(X), chunk)])
    lam = np.stack([1 - s - t, s, t], axis=1)
    return np.einsum("m,ma,mb->ab", W * area2, lam, I)


# --------------------------------------------------------------------------- #
# Oracle matrices                                                             #
# --------------------------------------------------------------------------- #
def _moments(mesh, k, p, q):
    c = mesh.vertices[mesh.panels]
    if mesh.dimension == 2:
        return pair_moments_2d(c[p, :, 0], c[q, :, 0], k)
    return pair_moments_3d(c[p], c[q], k)


def oracle_single_layer(mesh, k):
    P = mesh.n_panels
    A = np.zeros((P, P), dtype=complex)
    for p in range(P):
        for q in range(p, P):
            A[p, q] = A[q, p] = _moments(mesh, k, p, q).sum()
    return A


def _grads(mesh):
    c = mesh.vertices[mesh.panels]
    if mesh.dimension == 2:
        d = c[:, 1, 0] - c[:, 0, 0]
        return np.stack([-1 / d, 1 / d], axis=1)[:, :, None]
    return np.array([_gradients(t[:, :2]) for t in c])


def oracle_hypersingular(mesh, k):
    """-int int Phi [grad lam_j . grad lam_i - k^2 lam_i lam_j] over interior hats."""
    used = np.zeros(mesh.n_vertices, bool)
    used[mesh.panels.ravel()] = True
    dofs = np.flatnonzero(used & ~mesh.boundary)
    idx = -np.ones(mesh.n_vertices, int)
    idx[dofs] = np.arange(len(dofs))
    G = _grads(mesh)
    A = np.zeros((len(dofs), len(dofs)), dtype=complex)
    for p in range(mesh.n_panels):
        for q in range(mesh.n_panels):
            ip, iq = idx[mesh.panels[p]], idx[mesh.panels[q]]
            if not ((ip >= 0).any() and (iq >= 0).any()):
                continue
            M = _moments(mesh, k, p, q)
            s0 = M.sum()
            for a in range(len(ip)):
                for b in range(len(iq)):
                    if ip[a] < 0 or iq[b] < 0:
                        continue
                    A[ip[a], iq[b]] += -(G[p, a] @ G[q, b] * s0 - k**2 * M[a, b])
    return A


# --------------------------------------------------------------------------- #
# Off-surface finite-difference construction of the hypersingular form (2D)   #
# --------------------------------------------------------------------------- #
def _hat(mesh, v):
    """Breakpoints and values of the hat at vertex v on a 2D mesh."""
    x = mesh.vertices[:, 0]
    segs = [p for p in mesh.panels if v in p]
    pts = sorted({x[i] for s in segs for i in s})
    return segs, pts


def _graded_nodes(a, b, crit, scale, order=12, ratio=0.2):
    """Composite Gauss nodes on [a, b], split at ``crit`` and graded
    geometrically toward every breakpoint down to ``scale``."""
    cuts = sorted({a, b, *[c for c in crit if a < c < b]})
    g, w = _leg01(order)
    xs, ws = [], []
    for lo, hi in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (lo + hi)
        for end, other in ((lo, mid), (hi, mid)):
            edges = [other]
            d = abs(other - end)
            while d > scale:
                d *= ratio
                edges.append(end + np.sign(other - end) * d)
            edges.append(end)
            for p, q in zip(edges[:-1], edges[1:]):
                xs.append(p + (q - p) * g)
                ws.append(abs(q - p) * w)
    return np.concatenate(xs), np.concatenate(ws)


def _hat_values(mesh, v, t):
    _, pts = _hat(mesh, v)
    xv = mesh.vertices[v, 0]
    return np.interp(t, [pts[0], xv, pts[-1]], [0.0, 1.0, 0.0], left=0.0, right=0.0)


def double_layer_2d(mesh, v, x1, z, k):
    """D lam_v at (x1, z), kernel z g(r) with g = (ik/4) H1(kr)/r."""
    _, pts = _hat(mesh, v)
    t, w = _graded_nodes(pts[0], pts[-1], pts[1:-1] + [x1], 0.05 * abs(z))
    r = np.hypot(x1 - t, z)
    g = 0.25j * k * special.hankel1(1, k * r) / r
    return np.sum(w * g * z * _hat_values(mesh, v, t))


def fd_hypersingular_2d(mesh, k, i, j, z=1e-3, step=None):
    """<d_n D lam_j, lam_i> with the normal derivative by central differences
    at height z above the screen; tends to the Galerkin entry as z -> 0."""
    step = step or 0.25 * z
    _, pts_i = _hat(mesh, i)
    _, pts_j = _hat(mesh, j)
    s, w = _graded_nodes(pts_i[0], pts_i[-1], pts_i[1:-1] + pts_j, 0.05 * z)
    dn = np.array([double_layer_2d(mesh, j, x, z + step, k) - double_layer_2d(mesh, j, x, z - step, k)
                   for x in s]) / (2 * step)
    return np.sum(w * dn * _hat_values(mesh, i, s))


def fd_hypersingular_extrapolated(mesh, k, i, j, z0=2e-3):
    """Second-order Richardson extrapolation of fd_hypersingular_2d over
    heights z0, z0/2, z0/4 (removes the O(z) and O(z^2) terms)."""
    f = [fd_hypersingular_2d(mesh, k, i, j, z=z0 / 2**m) for m in range(3)]
    r1 = [2 * f[1] - f[0], 2 * f[2] - f[1]]
    return (4 * r1[1] - r1[0]) / 3

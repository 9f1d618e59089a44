"""
Numba kernels for panel-pair integrals

    B[a, b] = int_{panel p} int_{panel q} Phi(|x - y|) phi_a(x) phi_b(y) ds(y) ds(x)

with phi_a the linear nodal shape functions of each panel (they sum to one,
so the piecewise-constant entry is ``B.sum()``).

n = 2
-----
All panels lie on the x1-axis.  With s = t + u the double integral becomes

    B[a, b] = int K(|u|) Q_ab(u) du,
    Q_ab(u) = int_{t in [a0,a1], t+u in [c0,c1]} phi_a(t) phi_b(t + u) dt,

where Q_ab is a cubic polynomial between the breakpoints
{c0-a1, c0-a0, c1-a1, c1-a0} (and 0).  On the pieces adjacent to u = 0 the
kernel is split as K = -ln(u)/(2 pi) + R(u): the log part is integrated in
closed form against the exact cubic, the smooth remainder with a graded
Gauss rule.  Pieces away from 0 use Gauss rules on geometrically graded
sub-intervals.

n = 3
-----
Triangles are parametrised over T = {0 <= x2 <= x1 <= 1} by
x = (1-x1) P0 + (x1-x2) P1 + x2 P2 (shape functions (1-x1, x1-x2, x2),
Jacobian 2|tau|).  Coincident, edge- and vertex-adjacent pairs use
Sauter-Schwab rules (precomputed points in T x T); other pairs use
collapsed Gauss rules whose order depends on the separation.
"""

import math

import numpy as np
from numba import njit, prange

from .specialfn import hankel01_scalar, phi2_remainder_scalar

_INV_2PI = 1.0 / (2.0 * math.pi)
_INV_4PI = 1.0 / (4.0 * math.pi)

# inverse Vandermonde for samples at v = 0, 1/3, 2/3, 1
_VINV = np.linalg.inv(np.vander(np.array([0.0, 1 / 3, 2 / 3, 1.0]), 4, increasing=True))


# --------------------------------------------------------------------------- #
# n = 2                                                                       #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _k2(r, k, smooth):
    """Full kernel (smooth=False) or remainder R (smooth=True)."""
    if smooth:
        return phi2_remainder_scalar(r, k)
    h0, h1 = hankel01_scalar(k * r)
    return 0.25j * h0


@njit(cache=True)
def _q2(u, a0, a1, xa, xb, c0, c1, ya, yb):
    """Q_ab(u) for the four shape-function pairs (exact 2-point Gauss)."""
    lo = max(a0, c0 - u)
    hi = min(a1, c1 - u)
    if hi <= lo:
        return 0.0, 0.0, 0.0, 0.0
    mid = 0.5 * (lo + hi)
    hw = 0.5 * (hi - lo)
    g = hw / math.sqrt(3.0)
    q00 = 0.0
    q01 = 0.0
    q10 = 0.0
    q11 = 0.0
    for t in (mid - g, mid + g):
        s = t + u
        fx0 = (t - xb) / (xa - xb)
        fx1 = 1.0 - fx0
        fy0 = (s - yb) / (ya - yb)
        fy1 = 1.0 - fy0
        q00 += hw * fx0 * fy0
        q01 += hw * fx0 * fy1
        q10 += hw * fx1 * fy0
        q11 += hw * fx1 * fy1
    return q00, q01, q10, q11


@njit(cache=True)
def _piece_regular(out, lo, hi, sign, k, smooth, geo, gx, gw,
                   a0, a1, xa, xb, c0, c1, ya, yb):
    """Add int_{|u| in [lo, hi]} K(|u|) Q(sign*|u|) d|u|, 0 < lo < hi.

    Sub-intervals grow geometrically away from the kernel singularity at 0
    and are capped at ``1.5/k`` for oscillation.
    """
    x0 = lo
    cap = 1.5 / k
    while x0 < hi:
        w = min(geo * x0, cap)
        x1 = min(hi, x0 + w)
        if hi - x1 < 1e-3 * w:
            x1 = hi
        span = x1 - x0
        for i in range(gx.size):
            r = x0 + span * gx[i]
            kv = _k2(r, k, smooth) * (span * gw[i])
            q00, q01, q10, q11 = _q2(sign * r, a0, a1, xa, xb, c0, c1, ya, yb)
            out[0, 0] += kv * q00
            out[0, 1] += kv * q01
            out[1, 0] += kv * q10
            out[1, 1] += kv * q11
        x0 = x1


@njit(cache=True)
def _piece_singular(out, U, sign, k, geo, gx, gw, hx, hw, vinv,
                    a0, a1, xa, xb, c0, c1, ya, yb):
    """Add int_0^U K(w) Q(sign*w) dw with K = -ln(w)/(2 pi) + R(w)."""
    # exact cubic coefficients of Q on the piece (local variable v = w/U)
    samp = np.zeros((4, 4))
    for i in range(4):
        v = i / 3.0
        q00, q01, q10, q11 = _q2(sign * U * v, a0, a1, xa, xb, c0, c1, ya, yb)
        samp[i, 0] = q00
        samp[i, 1] = q01
        samp[i, 2] = q10
        samp[i, 3] = q11
    coef = vinv @ samp
    lu = math.log(U)
    for c in range(4):
        acc = 0.0
        for m in range(4):
            acc += coef[m, c] * (lu / (m + 1.0) - 1.0 / (m + 1.0) ** 2)
        out[c // 2, c % 2] += -_INV_2PI * U * acc
    # smooth remainder: graded rule w = Uc v^2 near 0, then regular pieces
    uc = min(U, 1.5 / k)
    for i in range(hx.size):
        v = hx[i]
        w = uc * v * v
        if w <= 0.0:
            continue
        kv = _k2(w, k, True) * (2.0 * uc * v * hw[i])
        q00, q01, q10, q11 = _q2(sign * w, a0, a1, xa, xb, c0, c1, ya, yb)
        out[0, 0] += kv * q00
        out[0, 1] += kv * q01
        out[1, 0] += kv * q10
        out[1, 1] += kv * q11
    if uc < U:
        _piece_regular(out, uc, U, sign, k, True, geo, gx, gw,
                       a0, a1, xa, xb, c0, c1, ya, yb)


@njit(cache=True)
def block2d(xa, xb, ya, yb, k, gx, gw, hx, hw, vinv):
    """2x2 block for segments with end coordinates (xa, xb) and (ya, yb).

    Local index 0 is the shape function equal to 1 at the first coordinate.
    """
    out = np.zeros((2, 2), dtype=np.complex128)
    a0 = min(xa, xb)
    a1 = max(xa, xb)
    c0 = min(ya, yb)
    c1 = max(ya, yb)
    scale = max(a1 - a0, c1 - c0)
    tol = 1e-13 * scale
    br = np.empty(5)
    br[0] = c0 - a1
    br[1] = c0 - a0
    br[2] = c1 - a1
    br[3] = c1 - a0
    nb = 4
    if br[0] < 0.0 < br[3]:
        br[4] = 0.0
        nb = 5
    pts = np.sort(br[:nb])
    for i in range(nb):
        if abs(pts[i]) <= tol:
            pts[i] = 0.0
    for i in range(nb - 1):
        u0 = pts[i]
        u1 = pts[i + 1]
        if u1 - u0 <= tol:
            continue
        if u0 == 0.0:
            _piece_singular(out, u1, 1.0, k, 1.0, gx, gw, hx, hw, vinv,
                            a0, a1, xa, xb, c0, c1, ya, yb)
        elif u1 == 0.0:
            _piece_singular(out, -u0, -1.0, k, 1.0, gx, gw, hx, hw, vinv,
                            a0, a1, xa, xb, c0, c1, ya, yb)
        elif u0 > 0.0:
            _piece_regular(out, u0, u1, 1.0, k, False, 1.0, gx, gw,
                           a0, a1, xa, xb, c0, c1, ya, yb)
        else:
            _piece_regular(out, -u1, -u0, -1.0, k, False, 1.0, gx, gw,
                           a0, a1, xa, xb, c0, c1, ya, yb)
    return out


@njit(parallel=True, cache=True)
def blocks2d(pp, qq, X, k, gx, gw, hx, hw, vinv, out):
    """Blocks for the panel pairs (pp[m], qq[m]); X[p] = (x_first, x_second)."""
    for m in prange(pp.size):
        p = pp[m]
        q = qq[m]
        out[m, :, :] = block2d(X[p, 0], X[p, 1], X[q, 0], X[q, 1], k, gx, gw, hx, hw, vinv)


# --------------------------------------------------------------------------- #
# n = 3                                                                       #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _phi3(r, k):
    return complex(math.cos(k * r), math.sin(k * r)) * (_INV_4PI / r)


@njit(cache=True)
def _tri_area(P):
    return 0.5 * abs((P[1, 0] - P[0, 0]) * (P[2, 1] - P[0, 1])
                     - (P[1, 1] - P[0, 1]) * (P[2, 0] - P[0, 0]))


@njit(cache=True)
def block3d_tensor(Px, Py, k, tp, tw):
    """Product rule: collapsed Gauss points ``tp`` (M, 2) in T with weights ``tw``."""
    out = np.zeros((3, 3), dtype=np.complex128)
    M = tw.size
    yx = np.empty(M)
    yy = np.empty(M)
    sy = np.empty((M, 3))
    for j in range(M):
        s0 = 1.0 - tp[j, 0]
        s1 = tp[j, 0] - tp[j, 1]
        s2 = tp[j, 1]
        sy[j, 0] = s0
        sy[j, 1] = s1
        sy[j, 2] = s2
        yx[j] = s0 * Py[0, 0] + s1 * Py[1, 0] + s2 * Py[2, 0]
        yy[j] = s0 * Py[0, 1] + s1 * Py[1, 1] + s2 * Py[2, 1]
    for i in range(M):
        a0 = 1.0 - tp[i, 0]
        a1 = tp[i, 0] - tp[i, 1]
        a2 = tp[i, 1]
        xx = a0 * Px[0, 0] + a1 * Px[1, 0] + a2 * Px[2, 0]
        xy = a0 * Px[0, 1] + a1 * Px[1, 1] + a2 * Px[2, 1]
        inner0 = 0.0j
        inner1 = 0.0j
        inner2 = 0.0j
        for j in range(M):
            dx = xx - yx[j]
            dy = xy - yy[j]
            r = math.sqrt(dx * dx + dy * dy)
            v = _phi3(r, k) * tw[j]
            inner0 += v * sy[j, 0]
            inner1 += v * sy[j, 1]
            inner2 += v * sy[j, 2]
        wi = tw[i]
        out[0, 0] += wi * a0 * inner0
        out[0, 1] += wi * a0 * inner1
        out[0, 2] += wi * a0 * inner2
        out[1, 0] += wi * a1 * inner0
        out[1, 1] += wi * a1 * inner1
        out[1, 2] += wi * a1 * inner2
        out[2, 0] += wi * a2 * inner0
        out[2, 1] += wi * a2 * inner1
        out[2, 2] += wi * a2 * inner2
    jac = 4.0 * _tri_area(Px) * _tri_area(Py)
    return out * jac


@njit(cache=True)
def block3d_ss(Px, Py, k, xs, ys, ws):
    """Singular rule: matched points (xs[m], ys[m]) in T x T, weights ws."""
    out = np.zeros((3, 3), dtype=np.complex128)
    for m in range(ws.size):
        a0 = 1.0 - xs[m, 0]
        a1 = xs[m, 0] - xs[m, 1]
        a2 = xs[m, 1]
        b0 = 1.0 - ys[m, 0]
        b1 = ys[m, 0] - ys[m, 1]
        b2 = ys[m, 1]
        dx = (a0 * Px[0, 0] + a1 * Px[1, 0] + a2 * Px[2, 0]) - (b0 * Py[0, 0] + b1 * Py[1, 0] + b2 * Py[2, 0])
        dy = (a0 * Px[0, 1] + a1 * Px[1, 1] + a2 * Px[2, 1]) - (b0 * Py[0, 1] + b1 * Py[1, 1] + b2 * Py[2, 1])
        r = math.sqrt(dx * dx + dy * dy)
        if r == 0.0:
            continue
        v = _phi3(r, k) * ws[m]
        out[0, 0] += v * a0 * b0
        out[0, 1] += v * a0 * b1
        out[0, 2] += v * a0 * b2
        out[1, 0] += v * a1 * b0
        out[1, 1] += v * a1 * b1
        out[1, 2] += v * a1 * b2
        out[2, 0] += v * a2 * b0
        out[2, 1] += v * a2 * b1
        out[2, 2] += v * a2 * b2
    jac = 4.0 * _tri_area(Px) * _tri_area(Py)
    return out * jac


# pair classes
COINCIDENT, EDGE, VERTEX, NEAR, REGULAR, FAR = 0, 1, 2, 3, 4, 5


@njit(cache=True)
def classify3d(p, q, T, cent, rad, diam, far_ratio):
    """Return (class, perm_p, perm_q) for a triangle pair.

    For EDGE the shared edge is local (0, 1) of both permuted triangles in
    the same orientation; for VERTEX the shared vertex is local 0.
    """
    perm_p = np.array([0, 1, 2])
    perm_q = np.array([0, 1, 2])
    sa = np.empty(3, dtype=np.int64)
    sb = np.empty(3, dtype=np.int64)
    ns = 0
    for a in range(3):
        for b in range(3):
            if T[p, a] == T[q, b]:
                sa[ns] = a
                sb[ns] = b
                ns += 1
    if ns == 3:
        return COINCIDENT, perm_p, perm_q
    if ns == 2:
        perm_p[0] = sa[0]
        perm_p[1] = sa[1]
        perm_p[2] = 3 - sa[0] - sa[1]
        perm_q[0] = sb[0]
        perm_q[1] = sb[1]
        perm_q[2] = 3 - sb[0] - sb[1]
        return EDGE, perm_p, perm_q
    if ns == 1:
        for i in range(3):
            perm_p[i] = (sa[0] + i) % 3
            perm_q[i] = (sb[0] + i) % 3
        return VERTEX, perm_p, perm_q
    dx = cent[p, 0] - cent[q, 0]
    dy = cent[p, 1] - cent[q, 1]
    gap = math.sqrt(dx * dx + dy * dy) - rad[p] - rad[q]
    dm = max(diam[p], diam[q])
    if gap < dm:
        return NEAR, perm_p, perm_q
    if gap >= far_ratio * dm:
        return FAR, perm_p, perm_q
    return REGULAR, perm_p, perm_q


@njit(parallel=True, cache=True)
def blocks3d(pp, qq, V, T, cent, rad, diam, k, far_ratio,
             t_far, w_far, t_reg, w_reg, t_near, w_near,
             cx, cy, cw, ex, ey, ew, vx, vy, vw, out, cls_out):
    """Blocks for triangle pairs; V holds in-plane vertex coordinates (N, 2)."""
    for m in prange(pp.size):
        p = pp[m]
        q = qq[m]
        cls, pa, pb = classify3d(p, q, T, cent, rad, diam, far_ratio)
        Px = np.empty((3, 2))
        Py = np.empty((3, 2))
        for i in range(3):
            Px[i, 0] = V[T[p, pa[i]], 0]
            Px[i, 1] = V[T[p, pa[i]], 1]
            Py[i, 0] = V[T[q, pb[i]], 0]
            Py[i, 1] = V[T[q, pb[i]], 1]
        if cls == COINCIDENT:
            blk = block3d_ss(Px, Py, k, cx, cy, cw)
        elif cls == EDGE:
            blk = block3d_ss(Px, Py, k, ex, ey, ew)
        elif cls == VERTEX:
            blk = block3d_ss(Px, Py, k, vx, vy, vw)
        elif cls == NEAR:
            blk = block3d_tensor(Px, Py, k, t_near, w_near)
        elif cls == FAR:
            blk = block3d_tensor(Px, Py, k, t_far, w_far)
        else:
            blk = block3d_tensor(Px, Py, k, t_reg, w_reg)
        for a in range(3):
            for b in range(3):
                out[m, pa[a], pb[b]] = blk[a, b]
        cls_out[m] = cls


# --------------------------------------------------------------------------- #
# Scatter                                                                     #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def scatter_p0(A, pp, qq, blocks):
    for m in range(pp.size):
        s = blocks[m].sum()
        A[pp[m], qq[m]] = s
        A[qq[m], pp[m]] = s


@njit(cache=True)
def scatter_hyper(A, pp, qq, blocks, T, grads, dof, k2):
    """a_T entries: -sum [ (g_pa . g_qb) S0_pq - k^2 B_pq[a, b] ] over local hats."""
    nl = T.shape[1]
    for m in range(pp.size):
        p = pp[m]
        q = qq[m]
        blk = blocks[m]
        s0 = blk.sum()
        for a in range(nl):
            i = dof[T[p, a]]
            if i < 0:
                continue
            for b in range(nl):
                j = dof[T[q, b]]
                if j < 0:
                    continue
                gg = 0.0
                for c in range(grads.shape[2]):
                    gg += grads[p, a, c] * grads[q, b, c]
                val = -(gg * s0 - k2 * blk[a, b])
                A[i, j] += val
                if p != q:
                    A[j, i] += val

"""
Hankel functions and the Helmholtz fundamental solution.

The Hankel functions of the first kind of orders 0 and 1 are evaluated
without any library special functions:

* ``x <= 12``: ascending (Frobenius) series for J0, J1, Y0, Y1;
* ``x > 12``: Hankel's asymptotic expansion, truncated at the smallest term.

Both branches are written as scalar numba kernels so that the assembly
kernels can call them directly; the public functions are thin vectorised
wrappers.

Fundamental solutions (outgoing, time factor exp(-i w t))::

    n = 3:  Phi(r) = exp(i k r) / (4 pi r)
    n = 2:  Phi(r) = (i/4) H0(k r)

For n = 2 the logarithmic part is split off as
``Phi(r) = -ln(r)/(2 pi) + R(r)`` with ``R`` evaluated directly from the
series, which avoids cancellation for small ``k r``.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

EULER_GAMMA = 0.57721566490153286061
SERIES_SWITCH = 12.0
_TWO_OVER_PI = 2.0 / math.pi
_INV_2PI = 1.0 / (2.0 * math.pi)


# --------------------------------------------------------------------------- #
# Scalar kernels                                                              #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _series01(x):
    """Series pieces for 0 < x <= 12.

    Returns J0, J1, S0, S1 where
    Y0 = (2/pi)[(ln(x/2) + gamma) J0 + S0] and
    Y1 = -2/(pi x) + (2/pi) ln(x/2) J1 - S1/pi.
    """
    q = 0.25 * x * x
    # m = 0 terms
    t0 = 1.0  # (q^m)/(m!)^2 * (-1)^m
    t1 = 0.5 * x  # (x/2)(q^m)/(m!(m+1)!) * (-1)^m
    j0 = 1.0
    j1 = t1
    s0 = 0.0
    hm = 0.0  # harmonic number H_m
    # psi(m+1) + psi(m+2) = 2 H_m + 1/(m+1) - 2 gamma
    s1 = t1 * (1.0 - 2.0 * EULER_GAMMA)
    for m in range(1, 80):
        t0 *= -q / (m * m)
        t1 *= -q / (m * (m + 1.0))
        hm += 1.0 / m
        j0 += t0
        j1 += t1
        s0 -= hm * t0
        s1 += t1 * (2.0 * hm + 1.0 / (m + 1.0) - 2.0 * EULER_GAMMA)
        # absolute threshold: |H| is O(1) on this branch
        if m > q and abs(t0) * (hm + 1.0) < 1e-18 and abs(t1) * (hm + 1.0) < 1e-18:
            break
    return j0, j1, s0, s1


@njit(cache=True)
def _asymptotic01(x):
    """Hankel asymptotic expansion for x > 12; returns (H0, H1)."""
    p0 = 1.0 + 0.0j
    p1 = 1.0 + 0.0j
    a0 = 1.0
    a1 = 1.0
    ik = 1.0 + 0.0j
    last0 = 1.0
    last1 = 1.0
    for kk in range(1, 60):
        f = (2.0 * kk - 1.0) ** 2
        a0 *= (0.0 - f) / (kk * 8.0 * x)
        a1 *= (4.0 - f) / (kk * 8.0 * x)
        ik *= 1.0j
        if abs(a0) > last0 and abs(a1) > last1:
            break
        p0 += ik * a0
        p1 += ik * a1
        last0 = abs(a0)
        last1 = abs(a1)
        if last0 < 1e-17 and last1 < 1e-17:
            break
    amp = math.sqrt(_TWO_OVER_PI / x)
    ph0 = x - 0.25 * math.pi
    ph1 = x - 0.75 * math.pi
    e0 = complex(math.cos(ph0), math.sin(ph0))
    e1 = complex(math.cos(ph1), math.sin(ph1))
    return amp * e0 * p0, amp * e1 * p1


@njit(cache=True)
def hankel01_scalar(x):
    """Return (H0^(1)(x), H1^(1)(x)) for scalar x > 0."""
    if x > SERIES_SWITCH:
        return _asymptotic01(x)
    j0, j1, s0, s1 = _series01(x)
    lg = math.log(0.5 * x)
    y0 = _TWO_OVER_PI * ((lg + EULER_GAMMA) * j0 + s0)
    y1 = -_TWO_OVER_PI / x + _TWO_OVER_PI * lg * j1 - s1 / math.pi
    return complex(j0, y0), complex(j1, y1)


@njit(cache=True)
def phi2_remainder_scalar(r, k):
    """Smooth part R(r) = (i/4) H0(k r) + ln(r)/(2 pi) of the 2D kernel."""
    z = k * r
    if z > SERIES_SWITCH:
        h0, h1 = _asymptotic01(z)
        return 0.25j * h0 + _INV_2PI * math.log(r)
    j0, j1, s0, s1 = _series01(z)
    j0m1 = j0 - 1.0
    if z < 0.5:
        # recompute J0 - 1 without the leading 1 to keep relative accuracy
        q = 0.25 * z * z
        t = 1.0
        j0m1 = 0.0
        for m in range(1, 30):
            t *= -q / (m * m)
            j0m1 += t
            if abs(t) < 1e-18 * abs(j0m1):
                break
    re = -_INV_2PI * (math.log(r) * j0m1 + (math.log(0.5 * k) + EULER_GAMMA) * j0 + s0)
    return complex(re, 0.25 * j0)


@njit(cache=True)
def phi_scalar(r, k, n):
    """Fundamental solution at distance r > 0."""
    if n == 3:
        return complex(math.cos(k * r), math.sin(k * r)) / (4.0 * math.pi * r)
    h0, h1 = hankel01_scalar(k * r)
    return 0.25j * h0


@njit(cache=True)
def dphi_dr_over_r_scalar(r, k, n):
    """g(r) with grad_y Phi(x, y) = g(r) (x - y); g = -Phi'(r)/r."""
    if n == 3:
        e = complex(math.cos(k * r), math.sin(k * r)) / (4.0 * math.pi * r)
        return e * (1.0 / r - 1j * k) / r
    h0, h1 = hankel01_scalar(k * r)
    return 0.25j * k * h1 / r


# --------------------------------------------------------------------------- #
# Vectorised public API                                                       #
# --------------------------------------------------------------------------- #
@njit(cache=True)
def _hankel_array(order, x):
    out = np.empty(x.size, dtype=np.complex128)
    for i in range(x.size):
        h0, h1 = hankel01_scalar(x[i])
        out[i] = h0 if order == 0 else h1
    return out


def hankel1(order: int, x):
    """Hankel function of the first kind, H_order^(1)(x).

    Parameters
    ----------
    order : int
        0 or 1.
    x : float or array_like
        Positive real arguments.

    Returns
    -------
    complex or ndarray of complex
        J_order(x) + i Y_order(x); a scalar for scalar input.

    Raises
    ------
    ValueError
        If ``order`` is not 0 or 1, or any ``x <= 0`` (or non-finite).
    """
    if order not in (0, 1):
        raise ValueError(f"order must be 0 or 1, got {order!r}")
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
        raise ValueError("hankel1 requires finite x > 0")
    out = _hankel_array(int(order), arr.ravel()).reshape(arr.shape)
    return complex(out) if arr.ndim == 0 else out


def _check_kn(k, n):
    if n not in (2, 3):
        raise ValueError(f"dimension n must be 2 or 3, got {n!r}")
    if not (np.isfinite(k) and k > 0):
        raise ValueError(f"wavenumber k must be finite and > 0, got {k!r}")


def _distances(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.sqrt(np.sum(d * d, axis=-1))
    if np.any(r == 0.0):
        raise ValueError("Phi is singular at x == y")
    return d, r


@njit(cache=True)
def _phi_array(r, k, n):
    out = np.empty(r.size, dtype=np.complex128)
    for i in range(r.size):
        out[i] = phi_scalar(r[i], k, n)
    return out


@njit(cache=True)
def _g_array(r, k, n):
    out = np.empty(r.size, dtype=np.complex128)
    for i in range(r.size):
        out[i] = dphi_dr_over_r_scalar(r[i], k, n)
    return out


def phi(x, y, k: float, n: int):
    """Fundamental solution Phi(x, y) of the Helmholtz equation in R^n.

    Parameters
    ----------
    x, y : array_like, shape (..., n)
        Points; broadcast against each other. ``x != y`` required.
    k : float
        Wavenumber, ``k > 0``.
    n : int
        Ambient dimension, 2 or 3.

    Returns
    -------
    complex or ndarray of complex
    """
    _check_kn(k, n)
    _, r = _distances(x, y)
    r = np.asarray(r, dtype=float)
    out = _phi_array(r.ravel(), float(k), int(n)).reshape(r.shape)
    return complex(out) if r.ndim == 0 else out


def grad_phi_y(x, y, k: float, n: int):
    """Gradient of Phi(x, y) with respect to y.

    n = 3: Phi (1/r - i k)(x - y)/r;  n = 2: (i k/4) H1(k r)(x - y)/r.

    Returns
    -------
    ndarray of complex, shape (..., n)
    """
    _check_kn(k, n)
    d, r = _distances(x, y)
    r = np.asarray(r, dtype=float)
    g = _g_array(r.ravel(), float(k), int(n)).reshape(r.shape)
    return g[..., None] * d


def phi2_remainder(r, k: float):
    """Smooth remainder R(r) = Phi(r) + ln(r)/(2 pi) of the 2D kernel."""
    _check_kn(k, 2)
    arr = np.asarray(r, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("r must be > 0")
    flat = arr.ravel()
    out = np.array([phi2_remainder_scalar(v, float(k)) for v in flat], dtype=complex)
    out = out.reshape(arr.shape)
    return complex(out) if arr.ndim == 0 else out

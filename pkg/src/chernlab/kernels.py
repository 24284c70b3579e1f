"""Per-node kernels for the geodesic volume ratio.

Everything here works on flattened node arrays.  Each kernel has a
compiled twin (numba) and a vectorized numpy twin implementing the same
algorithm; ``backend=None`` picks the compiled one when available.

The volume ratio is ``u(t) = 1 + a S(c, t) - b C(c, t)`` with node fields
``a = u'_0``, ``b = N_0_bar / 4`` and the global constant ``c = G_0 / 2``:

    S(c, t) = sum_k c^k t^(2k+1) / (2k+1)!
    C(c, t) = sum_{k>=1} c^(k-1) t^(2k) / (2k)!

so ``S' = 1 + c C`` and ``C' = S``.
"""
import math

import numpy as np

from ._accel import HAVE_NUMBA, njit

_SERIES_CUTOFF = 0.1
_SERIES_TERMS = 14
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
MAX_LEVEL = 16


# ---------------------------------------------------------------- S and C

def sc_numpy(c, t):
    """``(S, C)`` for scalar ``c`` and scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    x = c * t * t
    small = np.abs(x) < _SERIES_CUTOFF
    s = np.empty_like(t)
    cc = np.empty_like(t)
    if np.any(small):
        ts, xs = t[small], x[small]
        s_term, c_term = ts.copy(), 0.5 * ts * ts
        s_sum, c_sum = s_term.copy(), c_term.copy()
        for k in range(1, _SERIES_TERMS):
            s_term = s_term * xs / ((2 * k) * (2 * k + 1))
            c_term = c_term * xs / ((2 * k + 1) * (2 * k + 2))
            s_sum += s_term
            c_sum += c_term
        s[small], cc[small] = s_sum, c_sum
    big = ~small
    if np.any(big):
        tb = t[big]
        if c > 0:
            gam = math.sqrt(c)
            s[big] = np.sinh(gam * tb) / gam
            # cosh(x) - 1 = 2 sinh(x/2)^2 avoids cancellation
            cc[big] = 2.0 * np.sinh(0.5 * gam * tb) ** 2 / c
        else:
            gam = math.sqrt(-c)
            s[big] = np.sin(gam * tb) / gam
            cc[big] = 2.0 * np.sin(0.5 * gam * tb) ** 2 / (-c)
    return s, cc


@njit(cache=True)
def _sc_scalar(c, t):
    x = c * t * t
    if abs(x) < _SERIES_CUTOFF:
        s_term = t
        c_term = 0.5 * t * t
        s_sum = s_term
        c_sum = c_term
        for k in range(1, _SERIES_TERMS):
            s_term = s_term * x / ((2 * k) * (2 * k + 1))
            c_term = c_term * x / ((2 * k + 1) * (2 * k + 2))
            s_sum += s_term
            c_sum += c_term
        return s_sum, c_sum
    if c > 0:
        gam = math.sqrt(c)
        return math.sinh(gam * t) / gam, 2.0 * math.sinh(0.5 * gam * t) ** 2 / c
    gam = math.sqrt(-c)
    return math.sin(gam * t) / gam, 2.0 * math.sin(0.5 * gam * t) ** 2 / (-c)


def u_closed(a, b, c, t):
    """``(u, u')`` at a single time."""
    s, cc = sc_numpy(c, np.array([float(t)]))
    s, cc = s[0], cc[0]
    return 1.0 + a * s - b * cc, a * (1.0 + c * cc) - b * s


# ------------------------------------------------- time integral of 1 / u

def _inverse_u_integral_numpy(a, b, c, t, tol):
    out = np.empty_like(a)
    done = np.zeros(a.shape, dtype=bool)
    if t == 0.0:
        out[:] = 0.0
        return out, 0

    def level(m):
        edges = np.linspace(0.0, t, m + 1)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
        taus = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wts = (half[:, None] * _GL_W[None, :]).ravel()
        s, cc = sc_numpy(c, taus)
        u = 1.0 + np.outer(a, s) - np.outer(b, cc)
        return (wts / u).sum(axis=1)

    prev = level(1)
    m = 1
    for lev in range(1, MAX_LEVEL + 1):
        m *= 2
        cur = level(m)
        ok = (np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))) & ~done
        out[ok] = cur[ok]
        done |= ok
        if done.all():
            return out, lev
        prev = cur
    out[~done] = cur[~done]
    return out, MAX_LEVEL


@njit(cache=True)
def _inverse_u_integral_numba(a, b, c, t, tol, gl_x, gl_w, max_level):
    n = a.shape[0]
    out = np.zeros(n)
    if t == 0.0:
        return out, 0
    q = gl_x.shape[0]
    prev = np.zeros(n)
    done = np.zeros(n, dtype=np.bool_)
    left = n
    m = 1
    lev = 0
    for lev in range(max_level + 1):
        # S, C depend on tau only: tabulate once per level
        h = t / m
        wts = np.empty(m * q)
        s_tab = np.empty(m * q)
        c_tab = np.empty(m * q)
        for p in range(m):
            for k in range(q):
                s_tab[p * q + k], c_tab[p * q + k] = _sc_scalar(c, (p + 0.5) * h + 0.5 * h * gl_x[k])
                wts[p * q + k] = 0.5 * h * gl_w[k]
        for i in range(n):
            if done[i]:
                continue
            acc = 0.0
            for r in range(m * q):
                acc += wts[r] / (1.0 + a[i] * s_tab[r] - b[i] * c_tab[r])
            out[i] = acc
            if lev > 0 and abs(acc - prev[i]) <= tol * max(1.0, abs(acc)):
                done[i] = True
                left -= 1
            prev[i] = acc
        if left == 0:
            break
        m *= 2
    return out, lev


def inverse_u_integral(a, b, c, t, tol=1e-12, backend=None):
    """Per-node ``int_0^t du / u`` by panel-doubling 8-point Gauss-Legendre.

    Returns the integrals and the deepest refinement level used.
    """
    a = np.ascontiguousarray(a, dtype=float).ravel()
    b = np.ascontiguousarray(b, dtype=float).ravel()
    if _pick(backend) == "numba":
        return _inverse_u_integral_numba(a, b, float(c), float(t), float(tol), _GL_X, _GL_W, MAX_LEVEL)
    return _inverse_u_integral_numpy(a, b, float(c), float(t), float(tol))


# -------------------------------------------------------------- RK4 oracle

def _rhs_numpy(u, ud, p, g0):
    return ud, 0.25 * (u * g0 - (p - 2.0 * ud * ud) / u), 1.0 / u


def _rk4_numpy(p, ud0, g0, t_end, steps):
    n = p.shape[0]
    h = t_end / steps
    u_hist = np.empty((steps + 1, n))
    ud_hist = np.empty((steps + 1, n))
    s_hist = np.empty((steps + 1, n))
    u, ud, s = np.ones(n), ud0.copy(), np.zeros(n)
    u_hist[0], ud_hist[0], s_hist[0] = u, ud, s
    for k in range(steps):
        k1 = _rhs_numpy(u, ud, p, g0)
        k2 = _rhs_numpy(u + 0.5 * h * k1[0], ud + 0.5 * h * k1[1], p, g0)
        k3 = _rhs_numpy(u + 0.5 * h * k2[0], ud + 0.5 * h * k2[1], p, g0)
        k4 = _rhs_numpy(u + h * k3[0], ud + h * k3[1], p, g0)
        u = u + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        ud = ud + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        s = s + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        u_hist[k + 1], ud_hist[k + 1], s_hist[k + 1] = u, ud, s
    return u_hist, ud_hist, s_hist


@njit(cache=True)
def _rk4_numba(p, ud0, g0, t_end, steps):
    n = p.shape[0]
    h = t_end / steps
    u_hist = np.empty((steps + 1, n))
    ud_hist = np.empty((steps + 1, n))
    s_hist = np.empty((steps + 1, n))
    for i in range(n):
        u_hist[0, i], ud_hist[0, i], s_hist[0, i] = 1.0, ud0[i], 0.0
    for k in range(steps):  # node loop innermost: contiguous history rows
        for i in range(n):
            u, ud, s, pi = u_hist[k, i], ud_hist[k, i], s_hist[k, i], p[i]
            a1, b1, c1 = ud, 0.25 * (u * g0 - (pi - 2.0 * ud * ud) / u), 1.0 / u
            u2, v2 = u + 0.5 * h * a1, ud + 0.5 * h * b1
            a2, b2, c2 = v2, 0.25 * (u2 * g0 - (pi - 2.0 * v2 * v2) / u2), 1.0 / u2
            u3, v3 = u + 0.5 * h * a2, ud + 0.5 * h * b2
            a3, b3, c3 = v3, 0.25 * (u3 * g0 - (pi - 2.0 * v3 * v3) / u3), 1.0 / u3
            u4, v4 = u + h * a3, ud + h * b3
            a4, b4, c4 = v4, 0.25 * (u4 * g0 - (pi - 2.0 * v4 * v4) / u4), 1.0 / u4
            u_hist[k + 1, i] = u + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
            ud_hist[k + 1, i] = ud + h / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4)
            s_hist[k + 1, i] = s + h / 6.0 * (c1 + 2 * c2 + 2 * c3 + c4)
    return u_hist, ud_hist, s_hist


def rk4(p, ud0, g0, t_end, steps, backend=None):
    """Classical RK4 for ``4 u'' = u G_0 - (P - 2 u'^2) / u`` and ``s' = 1 / u``.

    Returns histories of ``u``, ``u'`` and ``s`` with shape ``(steps + 1, nodes)``.
    """
    p = np.ascontiguousarray(p, dtype=float).ravel()
    ud0 = np.ascontiguousarray(ud0, dtype=float).ravel()
    if _pick(backend) == "numba":
        return _rk4_numba(p, ud0, float(g0), float(t_end), int(steps))
    return _rk4_numpy(p, ud0, float(g0), float(t_end), int(steps))


def _pick(backend):
    if backend is None:
        return "numba" if HAVE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is unavailable or disabled")
    return backend

"""Closed-form G-geodesics and an independent ODE oracle.

Along a geodesic the metric direction only rescales, ``g*'_t = g*'_0 / u_t``,
so the whole motion reduces to the scalar volume ratio ``u_t = Omega_t /
Omega_0`` at each node, which solves

    4 u'' + (P - 2 u'^2) / u - u G_0 = 0,   u(0) = 1,

with ``P = Tr (g*'_0)^2`` and the global constant ``G_0``.  The metric is
recovered as ``g_t = g_0 exp(s_t g*'_0)`` with ``s_t = int_0^t du / u``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from . import gspace as S
from . import kernels as K
from .errors import DegenerateVolume

U_FLOOR = 1e-6


@dataclass
class GGeodesic:
    base: S.StructurePoint
    v_star0: np.ndarray = field(repr=False)
    u_dot0: np.ndarray = field(repr=False)
    p0: np.ndarray = field(repr=False)  # Tr (v*)^2
    N0: np.ndarray = field(repr=False)
    N0_bar: np.ndarray = field(repr=False)
    G0: float = 0.0

    @property
    def c(self):
        return 0.5 * self.G0

    @property
    def gamma0(self):
        return math.sqrt(self.c) if self.G0 > 0 else None

    @property
    def spec(self):
        return self.base.spec

    @property
    def is_static(self):
        """True when ``u`` stays 1: no volume speed and ``N_0`` constant up to round-off."""
        scale = 1e-13 * max(1.0, abs(self.G0))
        return F.sup_norm(self.u_dot0) <= scale and F.sup_norm(self.N0_bar) <= scale


def geodesic_init(p, t, mass_tol=1e-10):
    """Initial data of the geodesic through ``p`` with speed ``t``."""
    spec = p.spec
    mass = F.quadrature(spec, t.big_v)
    if abs(mass) > mass_tol:
        raise ValueError(f"initial volume speed has mass {mass:.3e}")
    vs, udot = S.star(p, t)
    p0 = np.einsum("...ij,...ji->...", vs, vs)
    n0 = p0 - 2.0 * udot ** 2
    g0 = float(F.quadrature(spec, n0 * p.w))
    return GGeodesic(p, vs, udot, p0, n0, n0 - g0, g0)


def _coeffs(geo):
    return geo.u_dot0, 0.25 * geo.N0_bar, geo.c


def u_eval(geo, t, with_derivative=False):
    """Volume ratio ``u_t`` (and optionally ``u'_t``) from the closed form."""
    a, b, c = _coeffs(geo)
    s, cc = K.sc_numpy(c, np.array([float(t)]))
    u = 1.0 + a * s[0] - b * cc[0]
    if with_derivative:
        return u, a * (1.0 + c * cc[0]) - b * s[0]
    return u


def u_series(geo, t, terms=30):
    """Direct partial sum of the power series for ``u_t`` (oracle)."""
    a, b, c = _coeffs(geo)
    s = sum(c ** k * t ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(terms))
    cc = sum(c ** (k - 1) * t ** (2 * k) / math.factorial(2 * k) for k in range(1, terms + 1))
    return 1.0 + a * s - b * cc


def _min_u(geo, ts):
    a, b, c = _coeffs(geo)
    s, cc = K.sc_numpy(c, np.asarray(ts, dtype=float))
    return (1.0 + np.outer(a.ravel(), s) - np.outer(b.ravel(), cc)).min(axis=0)


def _first_crossing(geo, u_floor, sign):
    """First ``t > 0`` with ``min u(sign * t) <= u_floor``, or ``inf``."""
    if geo.is_static:
        return math.inf
    c = geo.c
    if c < 0:
        horizon = 2 * math.pi / math.sqrt(-c)  # u is periodic
    else:
        horizon = 1e4 if c == 0 else min(1e4, 600.0 / math.sqrt(c))
    lo, seg = 0.0, min(1.0, horizon)
    while lo < horizon:
        hi = min(lo + seg, horizon)
        ts = np.linspace(lo, hi, 513)
        vals = _min_u(geo, sign * ts)
        below = np.nonzero(vals <= u_floor)[0]
        if below.size:
            k = below[0]
            a_, b_ = ts[k - 1], ts[k]
            for _ in range(200):
                mid = 0.5 * (a_ + b_)
                if _min_u(geo, [sign * mid])[0] <= u_floor:
                    b_ = mid
                else:
                    a_ = mid
                if b_ - a_ <= 1e-15 * max(1.0, b_):
                    break
            return b_
        lo, seg = hi, 2 * seg
    return math.inf


def existence_window(geo, u_floor=U_FLOOR):
    """Largest interval around 0 on which ``min u_t > u_floor``; ``+-inf`` if unbounded."""
    if not 0 < u_floor < 1:
        raise ValueError("u_floor must lie in (0, 1)")
    return -_first_crossing(geo, u_floor, -1.0), _first_crossing(geo, u_floor, 1.0)


def _assemble(geo, u, udot, s):
    p = geo.base
    spec = p.spec
    u = u.reshape(spec.shape)
    udot = udot.reshape(spec.shape)
    s = s.reshape(spec.shape)
    gt = p.g @ F.matrix_exp(s[..., None, None] * geo.v_star0, metric=p.g)
    gt = F.sym(gt)
    vt = geo.v_star0 / u[..., None, None]
    point = S.StructurePoint(spec, gt, u * p.w)
    speed = S.TangentPair(F.sym(gt @ vt), udot * p.w)
    return point, speed


def evaluate(geo, t, u_floor=U_FLOOR, window=None, tol=1e-12):
    """Point and speed of the geodesic at time ``t``.

    Raises
    ------
    DegenerateVolume
        If ``u`` reaches ``u_floor`` between 0 and ``t``.
    """
    if window is None:
        window = existence_window(geo, u_floor)
    if not window[0] < t < window[1]:
        raise DegenerateVolume(t, window)
    a, b, c = _coeffs(geo)
    u, ud = u_eval(geo, t, with_derivative=True)
    s, _ = K.inverse_u_integral(a, b, c, t, tol)
    return _assemble(geo, u, ud, s)


def energy(geo, u, udot):
    """``G_t = int (P - 2 u'^2) / u Omega_0``."""
    p = geo.base
    return float(F.quadrature(p.spec, (geo.p0 - 2.0 * udot ** 2) / u * p.w))


def mass(geo, u):
    return float(F.quadrature(geo.spec, u * geo.base.w))


@dataclass
class Trajectory:
    geo: GGeodesic
    times: np.ndarray
    u: np.ndarray = field(repr=False)
    udot: np.ndarray = field(repr=False)
    s: np.ndarray = field(repr=False)

    def state(self, k):
        return _assemble(self.geo, self.u[k], self.udot[k], self.s[k])

    def u_field(self, k):
        return self.u[k].reshape(self.geo.spec.shape)

    def energies(self):
        shape = self.geo.spec.shape
        return np.array([energy(self.geo, self.u[k].reshape(shape), self.udot[k].reshape(shape))
                         for k in range(len(self.times))])


def rk4_integrate(geo, t_end, steps, u_floor=U_FLOOR, backend=None):
    """Classical RK4 on ``(u, u', s)`` per node; an oracle independent of the closed form."""
    if steps < 16:
        raise ValueError("rk4_integrate needs at least 16 steps")
    u, ud, s = K.rk4(geo.p0, geo.u_dot0, geo.G0, t_end, steps, backend)
    bad = np.nonzero(u.min(axis=1) <= u_floor)[0]
    if bad.size:
        raise DegenerateVolume(t_end * bad[0] / steps)
    times = np.linspace(0.0, t_end, steps + 1)
    return Trajectory(geo, times, u, ud, s)


# ------------------------------------------------------------ residuals

_D1 = (np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0)
_D2 = (np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0)


def _stencil(geo, t, h, window):
    return [evaluate(geo, t + k * h, window=window) for k in (-2, -1, 0, 1, 2)]


def system_residuals(geo, t, h=2e-3, window=None):
    """Residuals of both geodesic equations at ``t`` from 5-point differences of ``evaluate``.

    Returns ``(first, second)`` sup-norms.  The first equation is checked as
    ``d/dt (g^{-1} g') + (Omega'/Omega) g^{-1} g' = 0`` with every time
    derivative taken numerically from ``g_t`` and ``Omega_t``; the second in
    its integro-differential form with the integral recomputed at ``t``.
    """
    if window is None:
        window = existence_window(geo)
    pts = _stencil(geo, t, h, window)
    gs = np.stack([q.g for q, _ in pts])
    ws = np.stack([q.w for q, _ in pts])
    g, w = gs[2], ws[2]
    gd = np.tensordot(_D1, gs, axes=1) / h
    gdd = np.tensordot(_D2, gs, axes=1) / h ** 2
    wd = np.tensordot(_D1, ws, axes=1) / h
    wdd = np.tensordot(_D2, ws, axes=1) / h ** 2
    ginv = F.inv(g)
    gstar = ginv @ gd
    gstar_dot = ginv @ gdd - gstar @ gstar
    wstar = wd / w
    first = F.sup_norm(gstar_dot + wstar[..., None, None] * gstar)
    n_t = np.einsum("...ij,...ji->...", gstar, gstar) - 2.0 * wstar ** 2
    mean = F.quadrature(geo.spec, n_t * w)
    second = F.sup_norm(wdd / w + 0.25 * (n_t - mean))  # divided by Omega_t
    return first, second

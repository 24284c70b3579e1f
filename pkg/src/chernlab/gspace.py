"""The pseudo-Riemannian pairing on metrics times unit-mass volume forms.

A point is ``(g, Omega)`` with ``Omega = w dx^1 ^ ... ^ dx^d``; a tangent
pair ``(v, V)`` is a symmetric 2-tensor and a zero-mass top-form.  The
star view is ``(v*, V*) = (g^{-1} v, V / w)``.

The subspace ``F`` is cut out by ``D(v, V) := nabla^{*Omega} v* + grad V* = 0``
and is the G-orthogonal of the infinitesimal diffeomorphism orbit.
``project_to_F`` solves the constrained least-squares problem with a
preconditioned conjugate-gradient iteration on the normal equations.
"""
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import almostcomplex as AC
from . import fields as F
from . import geometry as G
from .errors import DegenerateFrame, NoConvergence

log = logging.getLogger(__name__)

FRAME_FLOOR = 1e-3


@dataclass
class StructurePoint:
    spec: F.GridSpec
    g: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    def validate(self, tol=1e-12):
        F.check_metric(self.g)
        F.check_volume(self.spec, self.w, unit_mass=True, tol=tol)
        return self

    def connection(self):
        return G.christoffel(self.spec, self.g)


@dataclass
class TangentPair:
    v: np.ndarray = field(repr=False)
    big_v: np.ndarray = field(repr=False)

    def __add__(self, other):
        return TangentPair(self.v + other.v, self.big_v + other.big_v)

    def __sub__(self, other):
        return TangentPair(self.v - other.v, self.big_v - other.big_v)

    def scale(self, a):
        return TangentPair(a * self.v, a * self.big_v)

    def validate(self, spec, tol=1e-12):
        mass = F.quadrature(spec, self.big_v)
        if abs(mass) > tol:
            raise ValueError(f"volume direction has mass {mass!r}, expected 0")
        return self


def star(p, t, ginv=None):
    """``(v*_g, V*_Omega)``."""
    if ginv is None:
        ginv = F.inv(p.g)
    return ginv @ t.v, t.big_v / p.w


def unstar(p, v_star, big_v_star):
    return TangentPair(F.sym(p.g @ v_star), big_v_star * p.w)


def zero_pair(spec):
    return TangentPair(np.zeros(spec.shape + (spec.dim, spec.dim)), np.zeros(spec.shape))


def g_product(p, a, b):
    """``G(a; b) = int [<u, v>_g - 2 U* V*] Omega``."""
    ginv = F.inv(p.g)
    dens = F.inner_sym(p.g, a.v, b.v, ginv) - 2.0 * (a.big_v / p.w) * (b.big_v / p.w)
    return float(F.quadrature(p.spec, dens * p.w))


def vector_norm(p, x, ginv=None):
    """``L^2(g, Omega)`` norm of a vector field."""
    dens = np.einsum("...i,...ij,...j->...", x, p.g, x)
    return float(np.sqrt(max(F.quadrature(p.spec, dens * p.w), 0.0)))


def f_residual(p, t, conn=None):
    """Residual field ``nabla^{*Omega} v* + grad V*`` and its ``L^2(g, Omega)`` norm."""
    if conn is None:
        conn = p.connection()
    vs, vstar = star(p, t, conn.ginv)
    r = (G.weighted_divergence(p.spec, p.g, p.w, vs, conn)
         + G.gradient(p.spec, p.g, vstar, conn.ginv))
    return r, vector_norm(p, r, conn.ginv)


def orbit_tangent(p, xi, conn=None):
    """``(L_xi g, L_xi Omega)``."""
    lg = G.lie_derivative(p.spec, xi, p.g, "metric", conn)
    lw = G.lie_derivative(p.spec, xi, p.w, "top-form")
    return TangentPair(F.sym(lg), lw)


def orbit_orthogonality_check(p, t, xi, conn=None):
    return g_product(p, t, orbit_tangent(p, xi, conn))


# ------------------------------------------------------------------ frames

def _symmetric_basis(d):
    out = []
    for a in range(d):
        for b in range(a, d):
            s = np.zeros((d, d))
            s[a, b] = s[b, a] = 1.0
            out.append(s)
    return out


def _anti_invariant_candidates(d):
    """Indices of symmetric basis elements whose anti-invariant parts span at ``(Id, J_std)``."""
    j0 = AC.standard_j(d)
    basis = _symmetric_basis(d)
    kept, stack = [], []
    for idx, s in enumerate(basis):
        cand = AC.anti_invariant_part(j0, s).ravel()
        trial = np.array(stack + [cand])
        if np.linalg.matrix_rank(trial, tol=1e-10) > len(stack):
            kept.append(idx)
            stack.append(cand)
    return kept


def symmetric_frame(g, j=None):
    """Pointwise ``<,>_g``-orthonormal frame of g-symmetric endomorphisms.

    With ``j`` given the frame spans the ``J``-anti-invariant sub-bundle.
    Returns an array ``E[..., a, i, k]``.  Raises ``DegenerateFrame`` when
    Gram-Schmidt loses rank.
    """
    d = g.shape[-1]
    ginv = F.inv(g)
    basis = _symmetric_basis(d)
    if j is None:
        cands = [ginv @ s for s in basis]
    else:
        cands = [AC.anti_invariant_part(j, ginv @ basis[i]) for i in _anti_invariant_candidates(d)]
    frame = []
    worst = np.inf
    for c in cands:
        e = c.copy()
        for q in frame:
            e = e - F.inner_endo(g, e, q, ginv)[..., None, None] * q
        nrm = np.sqrt(np.maximum(F.inner_endo(g, e, e, ginv), 0.0))
        worst = min(worst, float(nrm.min()))
        if nrm.min() < FRAME_FLOOR:
            raise DegenerateFrame(float(nrm.min()))
        frame.append(e / nrm[..., None, None])
    out = np.stack(frame, axis=-3)
    log.debug("frame of rank %d, worst Gram-Schmidt norm %.3e", len(frame), worst)
    return out


def frame_combine(frame, c):
    return np.einsum("...a,...aij->...ij", c, frame)


def frame_coefficients(g, frame, a, ginv=None):
    if ginv is None:
        ginv = F.inv(g)
    return np.stack([F.inner_endo(g, a, frame[..., k, :, :], ginv)
                     for k in range(frame.shape[-3])], axis=-1)


# ------------------------------------------------------------------- seeds

SEED_TYPES = ("fourier", "constant", "random")


@dataclass
class SeedSpec:
    type: str = "fourier"
    modes: object = field(default_factory=lambda: [[1, 0], [0, 1]])
    amplitudes: list = field(default_factory=lambda: [0.1, 0.1])
    anti_invariant: bool = False
    rng_seed: int = 0
    volume: bool = True

    def __post_init__(self):
        if self.type not in SEED_TYPES:
            raise ValueError(f"seed type must be one of {SEED_TYPES}, got {self.type!r}")
        if not self.amplitudes:
            raise ValueError("seed needs at least one amplitude")
        if self.type == "fourier" and len(self.modes) != len(self.amplitudes):
            raise ValueError("fourier seed needs one amplitude per mode")
        if self.type == "random" and (not isinstance(self.modes, int) or self.modes < 1):
            raise ValueError("random seed needs an integer maximal wavenumber in 'modes'")

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else dict(text)
        allowed = set(cls.__dataclass_fields__)
        unknown = set(data) - allowed
        if unknown:
            raise ValueError(f"unknown seed keys {sorted(unknown)}")
        return cls(**data)


def _mean_free(spec, w, f):
    return f - F.quadrature(spec, f * w)


def make_seed(p, seed, j=None):
    """Build an (unprojected) tangent pair from a seed description."""
    spec = p.spec
    x = spec.coords()
    frame = symmetric_frame(p.g, j if seed.anti_invariant else None)
    nf = frame.shape[-3]
    rng = np.random.default_rng(seed.rng_seed)
    c = np.zeros(spec.shape + (nf,))
    vstar = np.zeros(spec.shape)
    if seed.type == "constant":
        for a in range(nf):
            c[..., a] = seed.amplitudes[a % len(seed.amplitudes)]
    elif seed.type == "fourier":
        for k, amp in zip(seed.modes, seed.amplitudes):
            k = np.asarray(k, dtype=float)
            if k.shape != (spec.dim,):
                raise ValueError(f"mode {k.tolist()} does not match dimension {spec.dim}")
            phase_arg = sum(k[i] * x[i] for i in range(spec.dim))
            ph = rng.uniform(0.0, 2 * np.pi, nf + 1)
            for a in range(nf):
                c[..., a] += amp * np.cos(phase_arg + ph[a])
            if seed.volume:
                vstar += amp * np.cos(phase_arg + ph[nf])
    else:
        kmax = seed.modes
        rng_k = range(-kmax, kmax + 1)
        waves = [k for k in np.ndindex(*(len(rng_k),) * spec.dim)]
        amp = seed.amplitudes[0] / np.sqrt(len(waves))
        for idx in waves:
            k = np.array(idx) - kmax
            phase_arg = sum(k[i] * x[i] for i in range(spec.dim))
            coef = rng.normal(size=(nf + 1, 2)) * amp
            for a in range(nf + 1):
                term = coef[a, 0] * np.cos(phase_arg) + coef[a, 1] * np.sin(phase_arg)
                if a < nf:
                    c[..., a] += term
                elif seed.volume:
                    vstar += term
    vstar = _mean_free(spec, p.w, vstar)
    return unstar(p, frame_combine(frame, c), vstar)


# -------------------------------------------------------------- projection

@dataclass
class _Problem:
    p: StructurePoint
    conn: G.Connection
    frame: np.ndarray

    def forward(self, c, vstar):
        spec, p = self.p.spec, self.p
        h = frame_combine(self.frame, c)
        return (G.weighted_divergence(spec, p.g, p.w, h, self.conn)
                + G.gradient(spec, p.g, vstar, self.conn.ginv))

    def adjoint(self, y):
        """Adjoint of ``forward`` for the weighted inner products."""
        spec, p = self.p.spec, self.p
        grad_y = G.endo_of_gradient(G.covariant_derivative(self.conn, y, "vector"))
        c = frame_coefficients(p.g, self.frame, grad_y, self.conn.ginv)
        flux = p.w[..., None] * y
        div = sum(F.derive(spec, flux[..., m], m) for m in range(spec.dim))
        return c, -div / (2.0 * p.w)

    def lower(self, x):
        """Range-space Riesz map: ``w g x``."""
        return self.p.w[..., None] * np.einsum("...ij,...j->...i", self.p.g, x)

    def norm_of_lowered(self, r_low):
        dens = np.einsum("...i,...ij,...j->...", r_low, self.conn.ginv, r_low) / self.p.w
        return float(np.sqrt(max(F.quadrature(self.p.spec, dens), 0.0)))


def _precondition(spec, r):
    k2 = sum(kk ** 2 for kk in np.meshgrid(*[np.fft.fftfreq(spec.n, 1.0 / spec.n)] * spec.dim,
                                             indexing="ij"))
    axes = tuple(range(spec.dim))
    rh = np.fft.fftn(r, axes=axes)
    return np.fft.ifftn(rh / (1.0 + k2)[..., None], axes=axes).real


def project_to_F(p, t0, j=None, tol=1e-10, maxiter=2000, return_info=False):
    """Nearest pair in ``F`` (or ``F^J`` when ``j`` is given) to ``t0``.

    The metric direction is expanded in a pointwise orthonormal frame, so
    anti-invariance holds exactly.  The distance is the positive-definite
    variant of G, ``int (|v*|^2 + 2 V*^2) Omega``.

    Parameters
    ----------
    p : StructurePoint
    t0 : TangentPair
    j : ndarray, optional
        Compatible almost-complex structure restricting ``v`` to be
        ``J``-anti-invariant.
    tol : float
        Target ``L^2(g, Omega)`` norm of the output residual.
    maxiter : int
    return_info : bool
        Also return ``{"iterations", "residual"}``.

    Raises
    ------
    NoConvergence
        If the residual target is not reached in ``maxiter`` iterations.
    """
    spec = p.spec
    conn = p.connection()
    frame = symmetric_frame(p.g, j)
    prob = _Problem(p, conn, frame)
    vs0, vstar0 = star(p, t0, conn.ginv)
    c0 = frame_coefficients(p.g, frame, vs0, conn.ginv)
    vstar0 = _mean_free(spec, p.w, vstar0)

    r = prob.lower(prob.forward(c0, vstar0))  # b - B y with y = 0
    y = np.zeros(spec.shape + (spec.dim,))
    res = prob.norm_of_lowered(r)
    target = 0.5 * tol  # margin for drift between recursive and true residual
    it = 0
    if res > target:
        z = _precondition(spec, r)
        d = z.copy()
        rz = float(np.sum(r * z))
        for it in range(1, maxiter + 1):
            ca, va = prob.adjoint(d)
            bd = prob.lower(prob.forward(ca, va))
            dbd = float(np.sum(d * bd))
            if dbd <= 0:
                break
            alpha = rz / dbd
            y += alpha * d
            r -= alpha * bd
            res = prob.norm_of_lowered(r)
            if res <= target:
                break
            z = _precondition(spec, r)
            rz_new = float(np.sum(r * z))
            d = z + (rz_new / rz) * d
            rz = rz_new
    ca, va = prob.adjoint(y)
    c, vstar = c0 - ca, vstar0 - va
    out = unstar(p, frame_combine(frame, c), vstar)
    _, final = f_residual(p, out, conn)
    log.debug("projection: %d iterations, residual %.3e", it, final)
    if final > tol:
        raise NoConvergence(it, final)
    if return_info:
        return out, {"iterations": it, "residual": final}
    return out

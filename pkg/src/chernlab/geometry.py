"""Levi-Civita calculus on the periodic grid.

The weighted divergence is the formal adjoint of the covariant derivative
for the pairing ``int <A, B>_g Omega`` with ``<A, B>_g = Tr(A B^T_g)``:

    int <nabla W, H>_g Omega = int g(W, nabla^{*Omega} H) Omega.

It is evaluated in divergence form so that the identity holds to rounding
on the grid (the discrete derivative is antisymmetric under summation).
"""
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from .errors import StepTooLarge, UnsupportedRank


@dataclass
class Connection:
    spec: F.GridSpec
    g: np.ndarray = field(repr=False)
    ginv: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)  # gamma[..., i, j, k] = Gamma^i_{jk}


@dataclass
class CurvatureBundle:
    spec: F.GridSpec
    riemann: np.ndarray = field(repr=False)  # R[..., i, j, k, l] = R^i_{jkl}
    ricci: np.ndarray = field(repr=False)
    lowered: np.ndarray = field(repr=False)  # R_{ijkl} = g_{im} R^m_{jkl}

    def operator(self, xi, eta):
        """Endomorphism field ``R(xi, eta)`` with ``R(e_k, e_l)^i_j = R^i_{jkl}``."""
        return np.einsum("...ijkl,...k,...l->...ij", self.riemann, xi, eta)

    def scalar(self, ginv):
        return np.einsum("...ij,...ij->...", ginv, self.ricci)


def christoffel(spec, g):
    g = np.asarray(g, dtype=float)
    ginv = F.inv(g)
    dg = F.partials(spec, g)  # dg[..., m, a, b] = d_m g_ab
    lower = 0.5 * (np.einsum("...jlk->...ljk", dg)
                   + np.einsum("...kjl->...ljk", dg)
                   - dg)
    gamma = np.einsum("...il,...ljk->...ijk", ginv, lower)
    return Connection(spec, g, ginv, gamma)


def covariant_derivative(conn, t, rank):
    """``nabla T`` with the derivative index first: ``out[..., k, ...] = nabla_k T``."""
    spec, gam = conn.spec, conn.gamma
    p = F.partials(spec, t)
    if rank == "scalar":
        return p
    if rank == "vector":
        return p + np.einsum("...ikm,...m->...ki", gam, t)
    if rank == "1-form":
        return p - np.einsum("...mki,...m->...ki", gam, t)
    if rank == "endo":
        return (p + np.einsum("...ikm,...mj->...kij", gam, t)
                - np.einsum("...mkj,...im->...kij", gam, t))
    if rank in ("sym2", "2-form"):
        return (p - np.einsum("...mki,...mj->...kij", gam, t)
                - np.einsum("...mkj,...im->...kij", gam, t))
    raise UnsupportedRank(f"covariant derivative of rank {rank!r} is not supported")


def riemann(conn):
    spec, gam = conn.spec, conn.gamma
    dgam = F.partials(spec, gam)  # dgam[..., k, i, l, j] = d_k Gamma^i_{lj}
    r = (np.einsum("...kilj->...ijkl", dgam) - np.einsum("...likj->...ijkl", dgam)
         + np.einsum("...ikm,...mlj->...ijkl", gam, gam)
         - np.einsum("...ilm,...mkj->...ijkl", gam, gam))
    ricci = np.einsum("...ijil->...jl", r)
    lowered = np.einsum("...im,...mjkl->...ijkl", conn.g, r)
    return CurvatureBundle(spec, r, ricci, lowered)


def endo_of_gradient(nabla_w):
    """Turn ``nabla_k W^i`` (derivative index first) into the endomorphism ``xi -> nabla_xi W``."""
    return F.transpose(nabla_w)


def weighted_divergence(spec, g, w, h, conn=None):
    """``nabla^{*Omega}_g H`` for an endomorphism field ``H`` and volume density ``w``.

    Continuum formula: ``-g^{jk} (nabla_j H)^i_k + H^i_j g^{jk} d_k f`` with
    ``f = log(sqrt(det g) / w)``.
    """
    if conn is None:
        conn = christoffel(spec, g)
    ht = F.g_transpose(conn.g, h, conn.ginv)
    flux = w[..., None, None] * ht  # flux[..., k, m] = w Ht^k_m
    div = sum(F.derive(spec, flux[..., k, :], k) for k in range(spec.dim))
    lower = -div + w[..., None] * np.einsum("...ikm,...ki->...m", conn.gamma, ht)
    return np.einsum("...jm,...m->...j", conn.ginv, lower / w[..., None])


def gradient(spec, g, phi, ginv=None):
    if ginv is None:
        ginv = F.inv(g)
    return np.einsum("...ij,...j->...i", ginv, F.partials(spec, phi))


def hessian(conn, phi):
    spec = conn.spec
    dphi = F.partials(spec, phi)
    return F.partials(spec, dphi) - np.einsum("...mkj,...m->...kj", conn.gamma, dphi)


def laplace_beltrami(spec, g, phi):
    """Divergence-form Laplacian ``(1/sqrt g) d_i(sqrt g g^{ij} d_j phi)``."""
    sg = F.sqrt_det(g)
    flux = sg[..., None] * gradient(spec, g, phi)
    return sum(F.derive(spec, flux[..., i], i) for i in range(spec.dim)) / sg


def log_density_ratio(g, w):
    """``f = log(dV_g / Omega)`` from the densities."""
    return np.log(F.sqrt_det(g) / w)


def interior(xi, form):
    """``xi -| form`` for a 2-form, contracting the first slot."""
    return np.einsum("...i,...ij->...j", xi, form)


def lie_derivative(spec, w_field, t, rank, conn=None):
    """Lie derivative along the vector field ``w_field``.

    ``rank`` is ``"metric"`` (``t`` is the metric itself), ``"2-form"`` or
    ``"top-form"`` (``t`` is a density against ``dx^1 ^ ... ^ dx^d``).
    """
    if rank == "metric":
        if conn is None:
            conn = christoffel(spec, t)
        lowered = np.einsum("...ij,...j->...i", t, w_field)
        nw = covariant_derivative(conn, lowered, "1-form")
        return nw + F.transpose(nw)
    if rank == "2-form":
        contracted = np.einsum("...i,...ij->...j", w_field, t)
        out = F.exterior_derivative(spec, contracted, 1)
        dt = F.exterior_derivative(spec, t, 2)
        return out + np.einsum("...i,...ijk->...jk", w_field, dt)
    if rank == "top-form":
        flux = t[..., None] * w_field
        return sum(F.derive(spec, flux[..., i], i) for i in range(spec.dim))
    raise UnsupportedRank(f"Lie derivative of rank {rank!r} is not supported")


@dataclass
class VariationReport:
    lhs: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)
    residual_sup: float
    scale: float

    @property
    def relative(self):
        return self.residual_sup / self.scale if self.scale > 0 else self.residual_sup


def divergence_variation_check(spec, g, w, v, big_v, h):
    """Compare the first variation of the weighted divergence against its closed form.

    The endomorphism argument is frozen at ``v*_g``; the left side is the
    central difference in ``t`` of ``nabla^{*(w + tV)}_{g + tv} v*_g`` and
    the right side ``(1/4) grad|v|^2 - v* (nabla^* v* + grad V*)``.
    """
    ginv = F.inv(g)
    vs = ginv @ v
    sides = []
    for sgn in (1.0, -1.0):
        gs, ws = g + sgn * h * v, w + sgn * h * big_v
        if np.linalg.eigvalsh(gs).min() <= 0 or ws.min() <= 0:
            raise StepTooLarge(f"step {h} leaves the space of metrics / volume forms")
        sides.append(weighted_divergence(spec, gs, ws, vs))
    lhs = (sides[0] - sides[1]) / (2 * h)
    conn = christoffel(spec, g)
    r_field = weighted_divergence(spec, g, w, vs, conn) + gradient(spec, g, big_v / w, ginv)
    norm2 = F.inner_sym(g, v, v, ginv)
    rhs = 0.25 * gradient(spec, g, norm2, ginv) - np.einsum("...ij,...j->...i", vs, r_field)
    scale = max(F.sup_norm(lhs), F.sup_norm(rhs))
    return VariationReport(lhs, rhs, F.sup_norm(lhs - rhs), scale)

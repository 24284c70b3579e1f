"""Chern-Ricci forms of compatible almost-complex structures.

Two independent routes are provided.

Volume route
    The canonical bundle carries the global section ``beta = beta_1 ^ ... ^
    beta_n`` with ``beta_r = (dz^r)^{1,0}_J``.  Its hermitian norm against
    ``Omega`` is ``h = i^{n^2} beta ^ conj(beta) / Omega`` and the Chern
    connection form is ``alpha = i del_J log h + 2 Re(i mu)`` with
    ``dbar beta = mu ^ beta``.  The form is ``Ric_J(Omega) = -d alpha``.

Metric route
    The Chern connection of ``(T_X, J, g)`` is ``D = nabla - J (nabla J) / 2``;
    its curvature is assembled from the Riemann tensor and ``nabla J``, and
    ``Ric_J(omega)(xi, eta) = Tr_C(J C(xi, eta)) = Tr_R(J C(xi, eta)) / 2``.

Array conventions follow :mod:`chernlab.geometry`; a curvature-like array
``C[..., i, j, k, l]`` stores ``C(e_k, e_l)^i_j``.
"""
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from . import almostcomplex as AC
from . import fields as F
from . import geometry as G
from .errors import DegenerateFrame, UnsupportedRank

FRAME_FLOOR = 1e-3


@dataclass
class CanonicalFrame:
    n: int
    beta_r: np.ndarray = field(repr=False)  # (..., n, d) complex 1-forms
    beta: np.ndarray = field(repr=False)  # (n, 0)-form, (..., d) or (..., d, d)
    h: np.ndarray = field(repr=False)  # i^{n^2} beta ^ conj(beta) / Omega
    q: np.ndarray = field(repr=False)  # i^{n^2} beta ^ conj(beta) / (2^n dx), 1 at J_std


@dataclass
class RicciForms:
    ric_volume: np.ndarray = field(repr=False)
    ric_metric: np.ndarray = field(repr=False)
    imag_residual: float


VolumeRicci = namedtuple("VolumeRicci", "form imag_residual alpha")


def _wedge_n(beta_r):
    n = beta_r.shape[-2]
    if n == 1:
        return beta_r[..., 0, :]
    if n == 2:
        b1, b2 = beta_r[..., 0, :], beta_r[..., 1, :]
        return b1[..., :, None] * b2[..., None, :] - b2[..., :, None] * b1[..., None, :]
    raise UnsupportedRank(f"canonical frames are implemented for n <= 2, got n = {n}")


def _contract(form, v):
    k = form.ndim - v.ndim + 1  # form degree
    if k == 1:
        return np.einsum("...i,...i->...", form, v)
    if k == 2:
        return np.einsum("...ij,...i->...j", form, v)
    if k == 3:
        return np.einsum("...ijk,...i->...jk", form, v)
    raise UnsupportedRank(f"contraction of a degree-{k} form")


def canonical_frame(spec, j, w, gauge=None, floor=FRAME_FLOOR):
    """Global section of the canonical bundle built from ``dz^r``.

    Parameters
    ----------
    spec : GridSpec
    j : ndarray
        Almost-complex structure ``J[..., i, k]``.
    w : ndarray
        Density of ``Omega``.
    gauge : ndarray, optional
        Pointwise invertible complex ``(n, n)`` matrices mixing the
        ``beta_r``; used for gauge-invariance tests.
    floor : float
        Lower bound on the normalized density ``q``.

    Raises
    ------
    DegenerateFrame
        If ``min q <= floor``.
    """
    d, n = spec.dim, spec.half_dim
    dz = np.zeros((n, d), dtype=complex)
    for r in range(n):
        dz[r, r], dz[r, n + r] = 1.0, 1.0j
    beta_r = np.stack([AC.form_10(j, np.broadcast_to(dz[r], spec.shape + (d,))) for r in range(n)],
                      axis=-2)
    if gauge is not None:
        beta_r = np.einsum("...rs,...sk->...rk", gauge, beta_r)
    top = np.linalg.det(np.concatenate([beta_r, beta_r.conj()], axis=-2))
    # densities are taken in the orientation of omega^n, which is (-1)^{n(n-1)/2} dx^1...dx^d
    vol = (-1) ** (n * (n - 1) // 2) * (1j ** (n * n) * top).real
    q = vol / 2.0 ** n
    if gauge is None and q.min() <= floor:
        raise DegenerateFrame(float(q.min()))
    if gauge is not None and vol.min() <= 0:
        raise DegenerateFrame(float(q.min()))
    return CanonicalFrame(n, beta_r, _wedge_n(beta_r), vol / w, q)


def _epsilon_frame(j, n, eps_gauge=None):
    """(1,0) vectors ``eps_s = (e_s - i J e_s) / 2`` for ``s < n``; shape ``(..., n, d)``."""
    d = j.shape[-1]
    eye = np.eye(d)
    eps = np.stack([AC.vector_10(j, np.broadcast_to(eye[s], j.shape[:-1])) for s in range(n)], axis=-2)
    if eps_gauge is not None:
        eps = np.einsum("...st,...tk->...sk", eps_gauge, eps)
    return eps


def _evaluate_on(form, vecs):
    out = form
    for k in range(vecs.shape[-2]):
        out = _contract(out, vecs[..., k, :])
    return out


def dbar_coefficient(spec, frame, j, eps_gauge=None):
    """The (0,1)-form ``mu`` with ``dbar beta = mu ^ beta``, as ``mu_k = mu(e_k^{0,1})``."""
    d, n = spec.dim, frame.n
    dbeta = F.exterior_derivative(spec, frame.beta, n)
    eps = _epsilon_frame(j, n, eps_gauge)
    denom = _evaluate_on(frame.beta, eps)
    eye = np.eye(d)
    mu = []
    for k in range(d):
        e01 = AC.vector_01(j, np.broadcast_to(eye[k], j.shape[:-1]))
        vecs = np.concatenate([e01[..., None, :], eps], axis=-2)
        mu.append(_evaluate_on(dbeta, vecs) / denom)
    return np.stack(mu, axis=-1)


def connection_one_form(spec, frame, j, eps_gauge=None):
    """``alpha = i del_J log h + 2 Re(i mu)`` (complex 1-form)."""
    psi = np.log(frame.h)
    del_psi = AC.form_10(j, F.partials(spec, psi))
    mu = dbar_coefficient(spec, frame, j, eps_gauge)
    # mu_k = mu(e_k^{0,1}) already is mu(e_k) for a (0,1)-form
    return 1j * del_psi + 2.0 * (1j * mu).real


def chern_ricci_volume(spec, j, w, gauge=None, eps_gauge=None, floor=FRAME_FLOOR):
    """``Ric_J(Omega) = -d alpha``; returns the real form, the imaginary residual and ``alpha``."""
    frame = canonical_frame(spec, j, w, gauge, floor)
    alpha = connection_one_form(spec, frame, j, eps_gauge)
    da = F.exterior_derivative(spec, alpha, 1)
    return VolumeRicci(-da.real, F.sup_norm(da.imag), alpha)


# ------------------------------------------------------------ metric route

def chern_curvature_riemann_route(conn, j, curv, nabla_j=None):
    """``C(xi, eta) = R(xi, eta) - ([nabla_xi J, nabla_eta J]) / 4``."""
    if nabla_j is None:
        nabla_j = AC.cov_j(conn, j)
    prod = np.einsum("...kab,...lbc->...ackl", nabla_j, nabla_j)
    return curv.riemann - 0.25 * (prod - np.swapaxes(prod, -1, -2))


def chern_connection_matrices(conn, j, nabla_j=None):
    """``Gamma^D[..., i, k, m]`` with ``D_k e_m = Gamma^D^i_{km} e_i``."""
    if nabla_j is None:
        nabla_j = AC.cov_j(conn, j)
    corr = np.einsum("...ia,...kam->...ikm", j, nabla_j)
    return conn.gamma - 0.5 * corr


def chern_curvature_direct(conn, j, nabla_j=None):
    """Curvature of ``D = nabla - J nabla J / 2`` from its connection coefficients."""
    gam = chern_connection_matrices(conn, j, nabla_j)
    # connection matrix A_k = gam[..., :, k, :]; C(e_k, e_l) = d_k A_l - d_l A_k + [A_k, A_l]
    a = np.einsum("...ikm->...kim", gam)
    da = F.partials(conn.spec, a)  # da[..., k, l, i, m] = d_k (A_l)^i_m
    term = np.einsum("...klim->...imkl", da)
    comm = np.einsum("...kia,...lam->...imkl", a, a)
    return term - np.swapaxes(term, -1, -2) + comm - np.swapaxes(comm, -1, -2)


def chern_ricci_metric(conn, j, curv, nabla_j=None):
    """``Ric_J(omega)_{kl} = Tr_R(J C(e_k, e_l)) / 2``."""
    c = chern_curvature_riemann_route(conn, j, curv, nabla_j)
    return 0.5 * np.einsum("...ab,...bakl->...kl", j, c)


def bakry_emery(spec, g, w, conn=None, curv=None):
    """``Ric(g) + nabla d log(dV_g / Omega)``."""
    if conn is None:
        conn = G.christoffel(spec, g)
    if curv is None:
        curv = G.riemann(conn)
    return curv.ricci + G.hessian(conn, G.log_density_ratio(g, w))


def ricci_forms(spec, j, w, omega=None):
    if omega is None:
        omega = AC.standard_omega(spec.dim)
    g = AC.compatible_metric(j, omega)
    conn = G.christoffel(spec, g)
    curv = G.riemann(conn)
    vol = chern_ricci_volume(spec, j, w)
    return RicciForms(vol.form, chern_ricci_metric(conn, j, curv), vol.imag_residual)


# --------------------------------------------------------- identity table

def _tr_nabla_j(nabla_j):
    """``[Tr(nabla_. J nabla_. J)]_{kl}``."""
    return np.einsum("...kab,...lba->...kl", nabla_j, nabla_j)


def _dbar_endo(j, a):
    return 0.5 * (a + j @ a @ j)


def _g_of(g, a):
    """Bilinear form ``(xi, eta) -> g(A xi, eta)``."""
    return F.transpose(a) @ g


def nijenhuis_term(g, nij, grad_f):
    """The torsion correction ``(xi, eta) -> g(grad f, N(xi, eta))`` of the Hessian decomposition."""
    return np.einsum("...a,...ab,...bij->...ij", grad_f, g, nij)


def decomposition_residuals(spec, j, w, omega=None, parts=None):
    """Residual fields of the Bakry-Emery and Hessian decompositions.

    Returns a dict with ``"cx-dec-ric"`` and ``"cx-dec-hess"`` (2-tensor fields).
    """
    if omega is None:
        omega = AC.standard_omega(spec.dim)
    if parts is None:
        parts = _Parts(spec, j, w, omega)
    g, conn = parts.g, parts.conn
    f = G.log_density_ratio(g, w)
    grad_f = G.gradient(spec, g, f, conn.ginv)
    hess_endo = G.endo_of_gradient(G.covariant_derivative(conn, grad_f, "vector"))
    tail = _g_of(g, _dbar_endo(j, hess_endo)) + nijenhuis_term(g, parts.nij, grad_f)
    hess = G.hessian(conn, f)
    dec_hess = hess - (-AC.form_times_j(AC.ddc(spec, j, f), j) + tail)
    be = parts.curv.ricci + hess
    ric_vol = parts.ric_volume.form
    dec_ric = be - (-AC.form_times_j(ric_vol, j) - 0.25 * _tr_nabla_j(parts.nabla_j) + tail)
    return {"cx-dec-ric": dec_ric, "cx-dec-hess": dec_hess}


class _Parts:
    """Shared intermediate quantities for one ``(J, Omega)`` sample."""

    def __init__(self, spec, j, w, omega):
        self.spec, self.j, self.w = spec, j, w
        self.g = AC.compatible_metric(j, omega)
        self.conn = G.christoffel(spec, self.g)
        self.curv = G.riemann(self.conn)
        self.nabla_j = AC.cov_j(self.conn, j)
        self.nij = AC.nijenhuis(spec, j)
        self.ric_volume = chern_ricci_volume(spec, j, w)
        self.chern = chern_curvature_riemann_route(self.conn, j, self.curv, self.nabla_j)
        self.ric_metric = 0.5 * np.einsum("...ab,...bakl->...kl", j, self.chern)


def _commutator_with_j(c, j):
    return (np.einsum("...iakl,...aj->...ijkl", c, j) - np.einsum("...ia,...ajkl->...ijkl", j, c))


def chern_lc_fields(spec, j, conn, nabla_j):
    """Residual fields for ``D = nabla - J nabla J / 2``: complex-linear, metric, ``D^{0,1} = dbar``."""
    g = conn.g
    corr = 0.5 * np.einsum("...ia,...kaj->...kij", j, nabla_j)  # J nabla_k J / 2
    # D_k J = nabla_k J - [corr_k, J]
    dj = nabla_j - (corr @ j[..., None, :, :] - j[..., None, :, :] @ corr)
    # D_k g = -(g corr_k + corr_k^T g); zero iff corr_k is g-antisymmetric
    metric = np.einsum("...ia,...kaj->...kij", g, corr)
    metric = metric + np.swapaxes(metric, -1, -2)
    eye = np.eye(spec.dim)
    dbar = []
    for a in range(spec.dim):
        eta01 = AC.vector_01(j, np.broadcast_to(eye[a], j.shape[:-1]).astype(complex))
        for b in range(spec.dim):
            xi10 = AC.vector_10(j, np.broadcast_to(eye[b], j.shape[:-1]).astype(complex))
            cov = G.covariant_derivative(conn, xi10, "vector")  # [..., k, i]
            lhs = (np.einsum("...k,...ki->...i", eta01, cov)
                   - np.einsum("...k,...kij,...j->...i", eta01, corr, xi10))
            dbar.append(lhs - AC.vector_10(j, AC.lie_bracket(spec, eta01, xi10)))
    return {"linear": dj, "metric": metric, "dbar": np.stack(dbar, axis=-1)}


def chern_lc_residuals(spec, j, conn, nabla_j):
    """Sup norms of :func:`chern_lc_fields`."""
    return {k: F.sup_norm(v) for k, v in chern_lc_fields(spec, j, conn, nabla_j).items()}


IDENTITY_IDS = (
    "covj-nij", "anti-lin-covj", "chern-lc-linear", "chern-lc-metric", "chern-lc-dbar",
    "chern-ricci-rm-ricci", "j-inv-cric", "chern-rm", "j-lin-chr", "j-lin-rm",
    "cx-dec-ric", "cx-dec-hess", "functoriality", "ric-volume-closed", "ric-volume-imag",
)


def identity_residual_fields(spec, j, w, omega=None):
    """Residual fields of every identity of the suite for one sample, keyed by identity id."""
    if omega is None:
        omega = AC.standard_omega(spec.dim)
    p = _Parts(spec, j, w, omega)
    g, nj = p.g, p.nabla_j
    # g(nabla_xi J eta, mu) + 2 g(J xi, N(eta, mu)) over coordinate triples
    t1 = np.einsum("...ma,...kai->...kim", g, nj)
    t2 = 2.0 * np.einsum("...ak,...ab,...bim->...kim", j, g, p.nij)
    anti_lin = np.einsum("...ak,...aij->...kij", j, nj) + np.einsum("...ia,...kaj->...kij", j, nj)
    lc = chern_lc_fields(spec, j, p.conn, nj)
    ric_metric = p.ric_metric
    crr = ric_metric @ j - (p.curv.ricci + 0.25 * _tr_nabla_j(nj))
    direct = chern_curvature_direct(p.conn, j, nj)
    dec = decomposition_residuals(spec, j, w, omega, parts=p)
    functorial = chern_ricci_volume(spec, j, F.normalize_density(spec, F.sqrt_det(g))).form
    closed = (F.exterior_derivative(spec, p.ric_volume.form, 2) if spec.dim > 2
              else np.zeros(spec.shape))
    return {
        "covj-nij": t1 + t2,
        "anti-lin-covj": anti_lin,
        "chern-lc-linear": lc["linear"],
        "chern-lc-metric": lc["metric"],
        "chern-lc-dbar": lc["dbar"],
        "chern-ricci-rm-ricci": crr,
        "j-inv-cric": AC.two_form_20_02(j, ric_metric),
        "chern-rm": direct - p.chern,
        "j-lin-chr": _commutator_with_j(p.chern, j),
        "j-lin-rm": _commutator_with_j(p.curv.riemann, j),
        "cx-dec-ric": dec["cx-dec-ric"],
        "cx-dec-hess": dec["cx-dec-hess"],
        "functoriality": ric_metric - functorial,
        "ric-volume-closed": closed,
        "ric-volume-imag": np.full(spec.shape, p.ric_volume.imag_residual),
    }


def identity_residuals(spec, j, w, omega=None):
    """Sup-norm residuals of every identity of the suite for one sample.

    Keys are the stable ids in ``IDENTITY_IDS``; values are floats.
    """
    fields = identity_residual_fields(spec, j, w, omega)
    return {k: F.sup_norm(fields[k]) for k in IDENTITY_IDS}

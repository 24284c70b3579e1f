"""Almost-complex structures compatible with the standard symplectic form.

Conventions (fixed once, used everywhere):

* ``omega = sum_r dx^r ^ dx^{n+r}``, constant, so ``d omega = 0`` exactly.
* Maps from vectors to covectors contract the first slot, ``xi -| omega =
  omega(xi, .)``.  Hence ``J = -omega^{-1} g`` reads ``omega(xi, eta) =
  g(J xi, eta)`` and, as matrices, ``J = -g^{-1} omega`` and
  ``g = -J^T omega``.  For ``g = Id`` this gives ``J e_r = e_{n+r}``, so
  ``dz^r = dx^r + i dx^{n+r}`` is of type (1,0).
* Type projections: ``beta^{1,0} = (beta - i beta o J) / 2`` and
  ``xi^{1,0} = (xi - i J xi) / 2``.
* ``d^c u = -(1/2) du o J``, i.e. ``d^c = (i/2)(dbar - del)`` and
  ``dd^c = i del dbar`` on integrable structures.  This is the normalization
  for which ``Ric_J(Omega_1) - Ric_J(Omega_2) = -dd^c log(Omega_1/Omega_2)``.
* A bilinear form times ``J`` acts on the first slot: ``(phi J)(xi, eta) =
  phi(J xi, eta)``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import fields as F
from . import geometry as G
from .errors import IncompatiblePair, UnsupportedRank

DDC_FACTOR = -0.5


def standard_omega(dim):
    n = dim // 2
    om = np.zeros((dim, dim))
    for r in range(n):
        om[r, n + r] = 1.0
        om[n + r, r] = -1.0
    return om


def standard_j(dim):
    """The complex structure compatible with ``standard_omega`` and the flat metric."""
    return -standard_omega(dim)


@dataclass
class AcsField:
    j: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    retracted: bool = False

    @property
    def metric(self):
        return compatible_metric(self.j, self.omega)

    def square_defect(self):
        d = self.j.shape[-1]
        return F.sup_norm(self.j @ self.j + np.eye(d))


def compatible_metric(j, omega):
    """``g = -omega J`` in matrix form."""
    return -F.transpose(j) @ omega


def check_acs(acs, tol=1e-10):
    """Raise ``IncompatiblePair`` unless ``J^2 = -Id`` and ``-omega J`` is a metric."""
    if acs.square_defect() > tol:
        raise IncompatiblePair(f"J^2 + Id = {acs.square_defect():.3e}")
    g = acs.metric
    if F.sup_norm(g - F.transpose(g)) > tol * max(1.0, F.sup_norm(g)):
        raise IncompatiblePair("-omega J is not symmetric")
    if np.linalg.eigvalsh(F.sym(g)).min() <= 0:
        raise IncompatiblePair("-omega J is not positive definite")
    return acs


def acs_from_metric(omega, g, tol=1e-10):
    """``J = -omega^{-1} g``, with a polar retraction if ``g`` is not exactly compatible."""
    g = np.asarray(g, dtype=float)
    omega = np.broadcast_to(omega, g.shape)
    a = -F.inv(g) @ omega
    d = g.shape[-1]
    if F.sup_norm(a @ a + np.eye(d)) <= tol:
        return check_acs(AcsField(a, omega), tol)
    # a is g-antisymmetric, so -a^2 = a^T_g a is g-symmetric positive; J = a (-a^2)^{-1/2}
    root, iroot = F.metric_sqrt(g)
    s = F.sym(root @ (-(a @ a)) @ iroot)
    lam, q = np.linalg.eigh(s)
    if lam.min() <= 0:
        raise IncompatiblePair("polar retraction failed: -J^2 not positive")
    inv_sqrt = iroot @ ((q / np.sqrt(lam)[..., None, :]) @ F.transpose(q)) @ root
    j = a @ inv_sqrt
    return check_acs(AcsField(j, omega, retracted=True), tol)


def anti_invariant_part(j, a):
    """``(A + J A J) / 2``; the output anticommutes with ``J``."""
    return 0.5 * (a + j @ a @ j)


def invariant_part(j, a):
    return 0.5 * (a - j @ a @ j)


def nijenhuis(spec, j):
    """``N[..., k, i, j] = N^k_{ij}`` from ``4N(xi, eta) = [xi,eta] + J[xi,J eta] + J[J xi,eta] - [J xi,J eta]``."""
    dj = F.partials(spec, j)  # dj[..., l, a, b] = d_l J^a_b
    t1 = np.einsum("...km,...imj->...kij", j, dj)
    t3 = np.einsum("...li,...lkj->...kij", j, dj)
    four_n = t1 - np.swapaxes(t1, -1, -2) - t3 + np.swapaxes(t3, -1, -2)
    return 0.25 * four_n


def lie_bracket(spec, x, y):
    dx = F.partials(spec, x)
    dy = F.partials(spec, y)
    return np.einsum("...l,...lk->...k", x, dy) - np.einsum("...l,...lk->...k", y, dx)


def nijenhuis_bracket(spec, j, xi, eta):
    """``N(xi, eta)`` straight from the bracket definition (used as an oracle)."""
    def jv(v):
        return np.einsum("...ij,...j->...i", j, v)

    total = (lie_bracket(spec, xi, eta) + jv(lie_bracket(spec, xi, jv(eta)))
             + jv(lie_bracket(spec, jv(xi), eta)) - lie_bracket(spec, jv(xi), jv(eta)))
    return 0.25 * total


def apply_vector_2form(n, xi, eta):
    return np.einsum("...kij,...i,...j->...k", n, xi, eta)


def cov_j(conn, j):
    """``nabla J`` with ``out[..., k] = nabla_{e_k} J``."""
    return G.covariant_derivative(conn, j, "endo")


# ------------------------------------------------------------- type projections

def compose_j(beta, j):
    """``beta o J`` for a (possibly complex) 1-form."""
    return np.einsum("...k,...kj->...j", beta, j)


def form_10(j, beta):
    return 0.5 * (beta - 1j * compose_j(beta, j))


def form_01(j, beta):
    return 0.5 * (beta + 1j * compose_j(beta, j))


def vector_10(j, xi):
    return 0.5 * (xi - 1j * np.einsum("...ij,...j->...i", j, xi))


def vector_01(j, xi):
    return 0.5 * (xi + 1j * np.einsum("...ij,...j->...i", j, xi))


def two_form_11(j, phi):
    return 0.5 * (phi + F.transpose(j) @ phi @ j)


def two_form_20_02(j, phi):
    return 0.5 * (phi - F.transpose(j) @ phi @ j)


def type_projections(spec, j, phi, degree):
    """Type decomposition of a function differential (degree 0), 1-form or 2-form.

    Returns a dict of parts that sum back to the input (to ``d phi`` for degree 0).
    """
    if degree == 0:
        du = F.partials(spec, phi)
        return {"del": form_10(j, du), "dbar": form_01(j, du)}
    if degree == 1:
        return {"(1,0)": form_10(j, phi), "(0,1)": form_01(j, phi)}
    if degree == 2:
        return {"(1,1)": two_form_11(j, phi), "(2,0)+(0,2)": two_form_20_02(j, phi)}
    raise UnsupportedRank(f"type projection of degree {degree} is not supported")


def dc(spec, j, u):
    return DDC_FACTOR * compose_j(F.partials(spec, u), j)


def ddc(spec, j, u):
    return F.exterior_derivative(spec, dc(spec, j, u), 1)


def form_times_j(phi, j):
    """``(phi J)(xi, eta) = phi(J xi, eta)``."""
    return F.transpose(j) @ phi


def form_j_second(phi, j):
    """``(xi, eta) -> phi(xi, J eta)``."""
    return phi @ j

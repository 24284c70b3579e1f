import numpy as np
import pytest

from chernlab import fields as F
from chernlab import geometry as G
from chernlab.errors import StepTooLarge, UnsupportedRank

from conftest import random_metric, random_smooth


def _conformal(n):
    spec = F.GridSpec(2, n)
    x = spec.coords()
    f = 0.3 * np.sin(x[0]) + 0.2 * np.cos(x[0] + x[1])
    return spec, f, np.exp(2 * f)[..., None, None] * np.eye(2)


def test_flat_connection_vanishes():
    spec = F.GridSpec(2, 16)
    conn = G.christoffel(spec, F.identity(spec))
    assert F.sup_norm(conn.gamma) == 0.0
    assert F.sup_norm(G.riemann(conn).riemann) == 0.0


def test_conformal_gauss_curvature_oracle():
    # g = e^{2f} delta: Ric = K g with K = -e^{-2f} Delta f
    spec, f, g = _conformal(32)
    curv = G.riemann(G.christoffel(spec, g))
    k = -np.exp(-2 * f) * F.laplacian_flat(spec, f)
    assert F.sup_norm(curv.ricci - k[..., None, None] * g) < 1e-11


def _pair_defects(rl):
    bianchi = rl + np.einsum("...ijkl->...iklj", rl) + np.einsum("...ijkl->...iljk", rl)
    return np.array([F.sup_norm(rl + np.swapaxes(rl, -3, -4)), F.sup_norm(bianchi),
                     F.sup_norm(rl - np.einsum("...ijkl->...klij", rl))])


def test_riemann_symmetries():
    spec, _, g = _conformal(32)
    rl = G.riemann(G.christoffel(spec, g)).lowered
    assert F.sup_norm(rl + np.swapaxes(rl, -1, -2)) < 1e-13
    assert np.all(_pair_defects(rl) < 1e-11)


def test_riemann_symmetries_t4_converge():
    # these rely on the product rule, which the discrete derivative satisfies only up to truncation
    defects = []
    for n in (8, 12):
        spec = F.GridSpec(4, n)
        g = random_metric(spec, np.random.default_rng(0), eps=0.1)
        rl = G.riemann(G.christoffel(spec, g)).lowered
        assert F.sup_norm(rl + np.swapaxes(rl, -1, -2)) < 1e-12
        defects.append(_pair_defects(rl))
    assert np.all((defects[1] < defects[0] / 10) | (defects[1] < 1e-12))


def test_metric_compatibility():
    spec = F.GridSpec(2, 16)
    g = random_metric(spec, np.random.default_rng(1))
    conn = G.christoffel(spec, g)
    assert F.sup_norm(G.covariant_derivative(conn, g, "sym2")) < 1e-12
    with pytest.raises(UnsupportedRank):
        G.covariant_derivative(conn, g, "riemann")


def test_weighted_divergence_matches_continuum_formula():
    spec = F.GridSpec(2, 32)
    rng = np.random.default_rng(2)
    g = random_metric(spec, rng)
    w = F.normalize_density(spec, np.exp(random_smooth(spec, rng, kmax=1, amp=0.2)))
    h = random_smooth(spec, rng, kmax=1, shape=(2, 2))
    conn = G.christoffel(spec, g)
    nh = G.covariant_derivative(conn, h, "endo")  # [..., j, i, k]
    f = G.log_density_ratio(g, w)
    df = F.partials(spec, f)
    ref = (-np.einsum("...jk,...jik->...i", conn.ginv, nh)
           + np.einsum("...ij,...jk,...k->...i", h, conn.ginv, df))
    assert F.sup_norm(G.weighted_divergence(spec, g, w, h, conn) - ref) < 1e-9


@pytest.mark.parametrize("scheme", ["spectral", "central4"])
def test_weighted_divergence_is_discrete_adjoint(scheme):
    spec = F.GridSpec(2, 16, scheme)
    rng = np.random.default_rng(3)
    g = random_metric(spec, rng)
    w = F.normalize_density(spec, np.exp(random_smooth(spec, rng, kmax=1, amp=0.2)))
    conn = G.christoffel(spec, g)
    for _ in range(5):
        h = random_smooth(spec, rng, kmax=2, shape=(2, 2))
        xi = random_smooth(spec, rng, kmax=2, shape=(2,))
        div = G.weighted_divergence(spec, g, w, h, conn)
        lhs = F.quadrature(spec, np.einsum("...i,...ij,...j->...", div, g, xi) * w)
        b = G.endo_of_gradient(G.covariant_derivative(conn, xi, "vector"))
        rhs = F.quadrature(spec, F.inner_endo(g, h, b, conn.ginv) * w)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_lie_derivative_coordinate_oracles():
    spec = F.GridSpec(2, 32)
    rng = np.random.default_rng(4)
    g = random_metric(spec, rng)
    xi = random_smooth(spec, rng, kmax=1, shape=(2,))
    dxi = F.partials(spec, xi)  # [..., k, i] = d_k xi^i
    dg = F.partials(spec, g)
    ref = (np.einsum("...k,...kij->...ij", xi, dg) + np.einsum("...kj,...ik->...ij", g, dxi)
           + np.einsum("...ik,...jk->...ij", g, dxi))
    assert F.sup_norm(G.lie_derivative(spec, xi, g, "metric") - ref) < 1e-11
    w = F.normalize_density(spec, np.exp(random_smooth(spec, rng, kmax=1, amp=0.2)))
    lw = G.lie_derivative(spec, xi, w, "top-form")
    assert abs(F.quadrature(spec, lw)) < 1e-13
    phi = random_smooth(spec, rng, kmax=1, shape=(2, 2))
    phi = phi - F.transpose(phi)
    dphi = F.partials(spec, phi)
    ref2 = (np.einsum("...k,...kij->...ij", xi, dphi) + np.einsum("...kj,...ik->...ij", phi, dxi)
            + np.einsum("...ik,...jk->...ij", phi, dxi))
    assert F.sup_norm(G.lie_derivative(spec, xi, phi, "2-form") - ref2) < 1e-11
    with pytest.raises(UnsupportedRank):
        G.lie_derivative(spec, xi, phi, "endo")


def test_hessian_trace_is_laplacian():
    spec = F.GridSpec(2, 32)
    rng = np.random.default_rng(5)
    g = random_metric(spec, rng)
    phi = random_smooth(spec, rng, kmax=2)
    conn = G.christoffel(spec, g)
    hess = G.hessian(conn, phi)
    assert F.sup_norm(hess - F.transpose(hess)) < 1e-11
    tr = np.einsum("...ij,...ij->...", conn.ginv, hess)
    assert F.sup_norm(tr - G.laplace_beltrami(spec, g, phi)) < 1e-9


def test_divergence_variation_second_order():
    spec = F.GridSpec(2, 32)
    rng = np.random.default_rng(6)
    g = random_metric(spec, rng)
    w = F.normalize_density(spec, np.exp(random_smooth(spec, rng, kmax=1, amp=0.2)))
    v = F.sym(random_smooth(spec, rng, kmax=1, amp=0.3, shape=(2, 2)))
    big_v = w * random_smooth(spec, rng, kmax=1, amp=0.3)
    res = [G.divergence_variation_check(spec, g, w, v, big_v, h).residual_sup for h in (1e-2, 1e-3)]
    assert 1.8 <= np.log10(res[0] / res[1]) <= 2.2
    with pytest.raises(StepTooLarge):
        G.divergence_variation_check(spec, g, w, v, big_v, 1e3)

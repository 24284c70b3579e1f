import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chernlab import almostcomplex as AC
from chernlab import fields as F
from chernlab import gspace as S
from chernlab.errors import DegenerateFrame, NoConvergence

from conftest import random_smooth

SEED = S.SeedSpec("fourier", [[2, 3], [4, 1], [3, 3]], [0.2, 0.2, 0.15], True, 3)


def test_point_and_pair_validation(curved32):
    p = curved32.point.validate()
    bad = S.StructurePoint(p.spec, p.g, 2 * p.w)
    with pytest.raises(ValueError):
        bad.validate()
    pair = S.TangentPair(np.zeros_like(p.g), p.w)
    with pytest.raises(ValueError):
        pair.validate(p.spec)


def test_star_roundtrip_and_pairing_signature(curved32):
    p = curved32.point
    t = S.make_seed(p, S.SeedSpec("random", 2, [0.3], False, 1))
    vs, vstar = S.star(p, t)
    back = S.unstar(p, vs, vstar)
    assert F.sup_norm(back.v - t.v) < 1e-13 and F.sup_norm(back.big_v - t.big_v) < 1e-15
    metric_only = S.TangentPair(t.v, np.zeros_like(t.big_v))
    volume_only = S.TangentPair(np.zeros_like(t.v), t.big_v)
    assert S.g_product(p, metric_only, metric_only) > 0
    assert S.g_product(p, volume_only, volume_only) < 0
    other = S.make_seed(p, S.SeedSpec("random", 2, [0.3], False, 2))
    assert abs(S.g_product(p, t, other) - S.g_product(p, other, t)) < 1e-14


@pytest.mark.parametrize("anti,rank", [(False, 3), (True, 2)])
def test_frame_t2(curved32, anti, rank):
    g, j = curved32.g, curved32.j
    fr = S.symmetric_frame(g, j if anti else None)
    assert fr.shape[-3] == rank
    gram = np.stack([S.frame_coefficients(g, fr, fr[..., a, :, :]) for a in range(rank)], axis=-2)
    assert F.sup_norm(gram - np.eye(rank)) < 1e-12
    low = g[..., None, :, :] @ fr
    assert F.sup_norm(low - F.transpose(low)) < 1e-12
    if anti:
        jj = j[..., None, :, :]
        assert F.sup_norm(fr @ jj + jj @ fr) < 1e-12


def test_frame_t4_rank(t4a8):
    assert S.symmetric_frame(t4a8.g).shape[-3] == 10
    assert S.symmetric_frame(t4a8.g, t4a8.j).shape[-3] == 6


def test_frame_degenerates_for_split_structure():
    # J = diag(1, -1) kills the off-diagonal candidate
    with pytest.raises(DegenerateFrame):
        S.symmetric_frame(np.eye(2)[None], np.diag([1.0, -1.0])[None])


def test_seed_spec_validation_and_json():
    with pytest.raises(ValueError):
        S.SeedSpec("wavelet")
    with pytest.raises(ValueError):
        S.SeedSpec("fourier", [[1, 0]], [0.1, 0.2])
    with pytest.raises(ValueError):
        S.SeedSpec("random", [[1, 0]], [0.1])
    with pytest.raises(ValueError):
        S.SeedSpec.from_json('{"type": "fourier", "colour": 3}')
    assert S.SeedSpec.from_json(SEED.to_json()) == SEED
    assert json.loads(SEED.to_json())["anti_invariant"] is True


def test_make_seed_properties(curved32):
    p = curved32.point
    for seed in (SEED, S.SeedSpec("constant", [], [0.3, 0.2], True, 0), S.SeedSpec("random", 2, [0.4], True, 5)):
        t = S.make_seed(p, seed, curved32.j)
        vs, vstar = S.star(p, t)
        jj = curved32.j
        assert F.sup_norm(vs @ jj + jj @ vs) < 1e-12
        assert abs(F.quadrature(p.spec, t.big_v)) < 1e-14
        assert F.sup_norm(t.v - F.transpose(t.v)) == 0.0
    with pytest.raises(ValueError):
        S.make_seed(p, S.SeedSpec("fourier", [[1, 0, 0]], [0.1]))


def test_projection_properties(curved32):
    p, j = curved32.point, curved32.j
    t0 = S.make_seed(p, SEED, j)
    t, info = S.project_to_F(p, t0, j, tol=1e-10, return_info=True)
    assert info["residual"] <= 1e-10
    vs, _ = S.star(p, t)
    assert F.sup_norm(vs @ j + j @ vs) < 1e-12
    again = S.project_to_F(p, t, j, tol=1e-10)
    assert F.sup_norm(again.v - t.v) < 1e-9
    # the correction is G-orthogonal (in the positive-definite pairing) to F members
    delta = t0 - t
    other = S.project_to_F(p, S.make_seed(p, S.SeedSpec("random", 2, [0.3], True, 9), j), j)
    vs_d, vd = S.star(p, delta)
    vs_o, vo = S.star(p, other)
    dens = F.inner_endo(p.g, vs_d, vs_o) + 2.0 * vd * vo
    assert abs(F.quadrature(p.spec, dens * p.w)) < 1e-9


def test_projection_reports_non_convergence(curved32):
    p = curved32.point
    t0 = S.make_seed(p, SEED, curved32.j)
    with pytest.raises(NoConvergence) as exc:
        S.project_to_F(p, t0, curved32.j, tol=1e-12, maxiter=2)
    assert exc.value.iterations == 2 and exc.value.residual > 1e-12


@settings(max_examples=6)
@given(rng_seed=st.integers(0, 2 ** 32 - 1), anti=st.booleans())
def test_projected_seeds_are_orbit_orthogonal(curved32, rng_seed, anti):
    p = curved32.point
    j = curved32.j if anti else None
    t = S.project_to_F(p, S.make_seed(p, S.SeedSpec("random", 2, [0.3], anti, rng_seed), j), j)
    rng = np.random.default_rng(rng_seed)
    conn = p.connection()
    for _ in range(3):
        xi = random_smooth(p.spec, rng, kmax=2, shape=(2,))
        assert abs(S.orbit_orthogonality_check(p, t, xi, conn)) < 1e-8


def test_flat_anti_invariant_f_members_are_null(flat32):
    # on the flat torus every F^J direction has G(t, t) = 0
    p, j = flat32.point, flat32.j
    t = S.project_to_F(p, S.make_seed(p, SEED, j), j)
    assert abs(S.g_product(p, t, t)) < 1e-10
    generic = S.project_to_F(p, S.make_seed(p, S.SeedSpec("fourier", [[1, 0], [0, 1], [1, 1]],
                                                          [0.3, 0.2, 0.1], False, 3)))
    assert S.g_product(p, generic, generic) > 1e-2


def test_standard_structure_frame_matches_flat_oracle():
    g = np.eye(4)[None]
    fr = S.symmetric_frame(g, AC.standard_j(4)[None])
    # the J-anti-invariant symmetric matrices on R^4 form a 6-dimensional space; the frame spans it
    rng = np.random.default_rng(3)
    a = AC.anti_invariant_part(AC.standard_j(4), F.sym(rng.normal(size=(4, 4))))[None]
    c = S.frame_coefficients(g, fr, a)
    assert F.sup_norm(S.frame_combine(fr, c) - a) < 1e-14

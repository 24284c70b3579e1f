import math
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chernlab import _accel
from chernlab import fields as F
from chernlab import geodesic as GD
from chernlab import gspace as S
from chernlab import kernels as K
from chernlab.errors import DegenerateVolume
from chernlab.experiments import samples as SM

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")


@pytest.fixture(scope="module")
def generic():
    sample = SM.corpus_by_name(["flat-generic"])[0]
    b = sample.build(32)
    t = S.project_to_F(b.point, S.make_seed(b.point, sample.seed))
    geo = GD.geodesic_init(b.point, t)
    return geo, GD.existence_window(geo)


@given(c=st.floats(-4.0, 4.0), t=st.floats(-3.0, 3.0))
def test_sc_matches_series(c, t):
    s, cc = K.sc_numpy(c, np.array([t]))
    s_ref = sum(c ** k * t ** (2 * k + 1) / math.factorial(2 * k + 1) for k in range(60))
    c_ref = sum(c ** (k - 1) * t ** (2 * k) / math.factorial(2 * k) for k in range(1, 61))
    assert abs(s[0] - s_ref) <= 1e-12 * max(1.0, abs(s_ref))
    assert abs(cc[0] - c_ref) <= 1e-12 * max(1.0, abs(c_ref))


@pytest.mark.parametrize("c", [0.5, -0.5])
def test_sc_closed_forms(c):
    t = np.array([2.0])
    gam = math.sqrt(abs(c))
    s, cc = K.sc_numpy(c, t)
    if c > 0:
        assert abs(s[0] - math.sinh(2 * gam) / gam) < 1e-13
        assert abs(cc[0] - (math.cosh(2 * gam) - 1) / c) < 1e-13
    else:
        assert abs(s[0] - math.sin(2 * gam) / gam) < 1e-13
        assert abs(cc[0] - (1 - math.cos(2 * gam)) / -c) < 1e-13


def test_sc_continuous_across_branch_switch():
    c = 1.0
    t_cut = math.sqrt(0.1)
    lo = K.sc_numpy(c, np.array([t_cut * (1 - 1e-12)]))
    hi = K.sc_numpy(c, np.array([t_cut * (1 + 1e-12)]))
    assert abs(lo[0][0] - hi[0][0]) < 1e-12 and abs(lo[1][0] - hi[1][0]) < 1e-12


def test_inverse_u_integral_oracles():
    a = np.array([0.0, 0.5, -0.3])
    b = np.zeros(3)
    vals, _ = K.inverse_u_integral(a, b, 0.0, 0.7, backend="numpy")
    ref = np.array([0.7, math.log(1 + 0.35) / 0.5, math.log(1 - 0.21) / -0.3])
    assert F.sup_norm(vals - ref) < 1e-13
    zero, level = K.inverse_u_integral(a, b, 0.3, 0.0)
    assert level == 0 and not np.any(zero)


@needs_numba
def test_numba_and_numpy_kernels_agree():
    rng = np.random.default_rng(0)
    a, b, p = rng.normal(size=50) * 0.3, rng.normal(size=50) * 0.1, rng.uniform(0, 1, 50)
    for c in (0.04, -0.2, 0.0):
        x1, _ = K.inverse_u_integral(a, b, c, 0.4, backend="numba")
        x2, _ = K.inverse_u_integral(a, b, c, 0.4, backend="numpy")
        assert F.sup_norm(x1 - x2) < 1e-14
    h1 = K.rk4(p, a, 0.1, 0.4, 32, backend="numba")
    h2 = K.rk4(p, a, 0.1, 0.4, 32, backend="numpy")
    for u, v in zip(h1, h2):
        assert F.sup_norm(u - v) < 1e-14
    with pytest.raises(ValueError):
        K.rk4(p, a, 0.1, 0.4, 32, backend="cuda")


def test_fallback_switch_selects_numpy():
    code = ("from chernlab import _accel, kernels; import numpy as np;"
            "print(_accel.use_numba(), kernels._pick(None));"
            "print(kernels.inverse_u_integral(np.array([0.5]), np.zeros(1), 0.0, 0.7)[0][0])")
    env = dict(os.environ, CHERNLAB_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    first, second = out.stdout.split("\n")[:2]
    assert first == "False numpy"
    assert abs(float(second) - math.log(1.35) / 0.5) < 1e-13


def test_closed_form_matches_series(generic):
    geo, _ = generic
    for t in (-0.3, 0.1, 0.8):
        assert F.sup_norm(GD.u_eval(geo, t) - GD.u_series(geo, t)) < 1e-13


def test_energy_and_mass_conserved(generic):
    geo, window = generic
    assert geo.G0 > 0.05
    for t in np.linspace(-1.0, 1.0, 7):
        u, ud = GD.u_eval(geo, t, with_derivative=True)
        assert abs(GD.energy(geo, u, ud) - geo.G0) <= 1e-12 * abs(geo.G0)
        assert abs(GD.mass(geo, u) - 1.0) < 1e-13
        q, _ = GD.evaluate(geo, t, window=window)
        assert abs(F.quadrature(q.spec, q.w) - 1.0) < 1e-13


def test_existence_window_endpoints(generic):
    geo, (lo, hi) = generic
    assert lo < 0 < hi and math.isfinite(lo) and math.isfinite(hi)
    for end in (lo, hi):
        assert abs(GD.u_eval(geo, end).min() - GD.U_FLOOR) < 1e-9
        assert GD.u_eval(geo, 0.99 * end).min() > GD.U_FLOOR
    with pytest.raises(DegenerateVolume) as exc:
        GD.evaluate(geo, hi + 0.1)
    assert exc.value.window == (lo, hi)
    with pytest.raises(ValueError):
        GD.existence_window(geo, u_floor=1.5)


def test_static_geodesic_is_eternal():
    sample = SM.corpus_by_name(["flat-constant"])[0]
    b = sample.build(16)
    t = S.project_to_F(b.point, S.make_seed(b.point, sample.seed, b.j), b.j)
    geo = GD.geodesic_init(b.point, t)
    assert geo.is_static and GD.existence_window(geo) == (-math.inf, math.inf)
    q, speed = GD.evaluate(geo, 5.0)
    assert F.sup_norm(q.w - b.w) < 1e-15


def test_geodesic_init_rejects_massive_volume_speed(generic):
    geo, _ = generic
    p = geo.base
    with pytest.raises(ValueError):
        GD.geodesic_init(p, S.TangentPair(np.zeros_like(p.g), p.w))


def test_rk4_is_fourth_order_and_agrees(generic):
    geo, _ = generic
    with pytest.raises(ValueError):
        GD.rk4_integrate(geo, 1.0, 8)
    t_end = 2.5
    ref = GD.u_eval(geo, t_end).ravel()
    errs = [F.sup_norm(GD.rk4_integrate(geo, t_end, m).u[-1] - ref) for m in (16, 32, 64, 128)]
    slopes = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(slopes > 3.8)
    traj = GD.rk4_integrate(geo, 0.5, 64)
    assert np.max(np.abs(traj.energies() - geo.G0)) < 1e-10


def test_geodesic_system_residuals(generic):
    geo, window = generic
    first, second = GD.system_residuals(geo, 0.3, window=window)
    assert first < 1e-8 and second < 1e-8

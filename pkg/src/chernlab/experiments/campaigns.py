"""Verification campaigns over the sample corpus.

Each campaign takes a :class:`SampleSpec`, runs it on every grid of the
sample and returns a :class:`CampaignReport`.  Hard criteria are judged at
the finest grid; coarser grids feed the refinement checks.  Every hard
criterion has a corrupted-input twin that must exceed its tolerance.
"""
import math
from dataclasses import replace

import numpy as np

from .. import almostcomplex as AC
from .. import chernricci as CR
from .. import fields as F
from .. import geodesic as GD
from .. import geometry as G
from .. import gspace as S
from . import reports as R

DEFAULT_TOLERANCES = {
    "projection": 1e-10,      # target residual of the projection onto F
    "f_initial": 1e-8,
    "f_max": 1e-6,
    "f_ratio_spectral": 8.0,
    "f_ratio_central4": 16.0,
    "negative_f": 1e-3,
    "j_square": 1e-12,
    "anticommute": 1e-10,
    "j_dot": 1e-5,
    "j_dot_step": 1e-3,
    "ric_flat": 1e-6,
    "ric_curved": 1e-5,
    "rho_min": 1e-2,
    "slope_lo": 1.8,
    "slope_hi": 2.2,
    "volume_only": 1e-7,
    "static": 1e-12,
    "identity_hard": 1e-6,
    "functoriality": 1e-7,
}

VARIATION_STEPS = (1e-2, 3e-3, 1e-3)
HARD_IDENTITIES = (
    "covj-nij", "anti-lin-covj", "chern-lc-linear", "chern-lc-metric", "chern-lc-dbar",
    "chern-ricci-rm-ricci", "j-inv-cric", "chern-rm", "j-lin-chr", "j-lin-rm",
    "cx-dec-ric", "cx-dec-hess", "ric-volume-closed", "ric-volume-imag",
)
REPORTED_IDENTITIES = ("chern-rm", "j-lin-rm", "chern-ricci-rm-ricci")
CAMPAIGNS = ("f-conservation", "main-theorem", "variation", "identities")


def tolerances(overrides=None):
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in (overrides or {}).items():
        if k not in tol:
            raise KeyError(f"unknown tolerance {k!r}")
        v = float(v)
        if not v > 0:
            raise ValueError(f"tolerance {k} must be positive, got {v}")
        tol[k] = v
    return tol


def _config(sample, tol, **extra):
    cfg = {"sample": sample.to_dict(), "tolerances": dict(tol)}
    cfg.update(extra)
    return cfg


def _control_seed(seed, dim):
    """A single-mode seed with a volume part; never in F before projection."""
    return replace(seed, type="fourier", modes=[[1] + [0] * (dim - 1)], amplitudes=[0.1], volume=True)


def _seed_pair(base, sample, tol, project=True):
    """Seed tangent pair at ``base``; projected onto F (or F^J) unless ``project`` is off."""
    p = base.point
    j = base.j if sample.seed.anti_invariant else None
    t0 = S.make_seed(p, sample.seed, j)
    if project:
        t0 = S.project_to_F(p, t0, j, tol=tol["projection"])
    return p, t0


def _geodesic(p, t0):
    geo = GD.geodesic_init(p, t0)
    return geo, GD.existence_window(geo)


def _finest(sample):
    return max(sample.grids)


def _doubling_pairs(ns):
    ns = sorted(ns)
    return [(n, 2 * n) for n in ns if 2 * n in ns]


# ------------------------------------------------------------ F-conservation

def run_f_conservation(sample, tol=None, project=True):
    """Conservation of the F condition along a geodesic, with refinement and a negative control.

    Parameters
    ----------
    sample : SampleSpec
    tol : dict, optional
        Overrides of ``DEFAULT_TOLERANCES``.
    project : bool
        Set to ``False`` to feed the raw seed (a corrupted run; its initial
        residual criterion fails).
    """
    tol = tolerances(tol)
    rep = R.CampaignReport("f-conservation", sample.name, _config(sample, tol, project=project))
    maxima, initial = {}, {}
    for n in sorted(sample.grids):
        base = sample.build(n)
        p, t0 = _seed_pair(base, sample, tol, project)
        geo, window = _geodesic(p, t0)
        initial[n] = S.f_residual(p, t0)[1]
        worst = 0.0
        for t in sample.time_grid:
            q, speed = GD.evaluate(geo, t, window=window)
            res = S.f_residual(q, speed)[1]
            worst = max(worst, res)
            rep.rows.append({"N": n, "t": t, "f_residual": res,
                             "G_t": GD.energy(geo, q.w / p.w, speed.big_v / p.w),
                             "mass": F.quadrature(q.spec, q.w)})
        maxima[n] = worst
    nf = _finest(sample)
    rep.add("initial residual", tol["f_initial"], initial[nf])
    rep.add(f"max_t residual at N={nf}", tol["f_max"], maxima[nf])
    key = "f_ratio_spectral" if sample.scheme == "spectral" else "f_ratio_central4"
    for lo, hi in _doubling_pairs(sample.grids):
        ratio = maxima[lo] / maxima[hi] if maxima[hi] > 0 else math.inf
        collapsed = R.is_collapsed(maxima[hi])
        rep.add(f"refinement ratio N={lo}->{hi}", tol[key], math.inf if collapsed else ratio,
                kind="min", note="fine grid at round-off" if collapsed else f"ratio {ratio:.3e}")
    if project:
        rep.add("negative control: residual-1e-2 seed", tol["negative_f"],
                _negative_f_control(sample, nf), kind="min")
    return rep


def _negative_f_control(sample, n):
    """Max residual along the geodesic of an unprojected seed rescaled to residual 1e-2."""
    base = sample.build(n)
    p = base.point
    j = base.j if sample.seed.anti_invariant else None
    raw = S.make_seed(p, _control_seed(sample.seed, sample.dim), j)
    r0 = S.f_residual(p, raw)[1]
    t0 = raw.scale(1e-2 / r0)
    geo, window = _geodesic(p, t0)
    return max(S.f_residual(*GD.evaluate(geo, t, window=window))[1] for t in sample.time_grid)


# ------------------------------------------------------------- main theorem

def _j_of(g, omega):
    return -F.inv(g) @ omega


def _main_at(sample, base, tol, project=True):
    """Time series of structure checks and the Chern-Ricci deviation on one grid."""
    spec = base.spec
    omega = AC.standard_omega(spec.dim)
    p, t0 = _seed_pair(base, sample, tol, project)
    rho = CR.chern_ricci_volume(spec, base.j, base.w).form
    geo, window = _geodesic(p, t0)
    h = tol["j_dot_step"]
    eye = np.eye(spec.dim)
    rows = []
    for t in sample.time_grid:
        q, speed = GD.evaluate(geo, t, window=window)
        j = _j_of(q.g, omega)
        vs = F.inv(q.g) @ speed.v
        jp = _j_of(GD.evaluate(geo, t + h, window=window)[0].g, omega)
        jm = _j_of(GD.evaluate(geo, t - h, window=window)[0].g, omega)
        jdot = (jp - jm) / (2 * h)
        ric = CR.chern_ricci_volume(spec, j, q.w).form
        rows.append({
            "N": spec.n, "t": t,
            "j_square": F.sup_norm(j @ j + eye),
            "anticommute": F.sup_norm(vs @ j + j @ vs),
            "j_dot": F.sup_norm(2 * jdot - (j @ vs - vs @ j)),
            "f_residual": S.f_residual(q, speed)[1],
            "ric_deviation": F.sup_norm(ric - rho),
        })
    return rows, F.sup_norm(rho)


def run_main_theorem(sample, tol=None, project=True, negative_control=True):
    """Invariance of the volume Chern-Ricci form along F^J geodesics.

    Hard tier on integrable samples; the deviation is logged on
    non-integrable ones.
    """
    if not sample.seed.anti_invariant:
        raise ValueError("main-theorem campaign needs an anti-invariant seed")
    tol = tolerances(tol)
    rep = R.CampaignReport("main-theorem", sample.name, _config(sample, tol, project=project))
    ns = sorted(sample.grids)
    dev, rho_norm = {}, {}
    for n in ns:
        base = sample.build(n)
        rows, rho_norm[n] = _main_at(sample, base, tol, project)
        rep.rows.extend(rows)
        dev[n] = max(r["ric_deviation"] for r in rows)
    nf = ns[-1]
    fine = [r for r in rep.rows if r["N"] == nf]
    for key in ("j_square", "anticommute", "j_dot"):
        rep.add(f"max_t {key}", tol[key], max(r[key] for r in fine))
    tier = "hard" if sample.integrable else "reported"
    flat = sample.base == "flat" and sample.volume_amplitude == 0.0
    ric_tol = tol["ric_flat"] if flat else tol["ric_curved"]
    rep.add(f"sup_t |Ric - rho| at N={nf}", ric_tol, dev[nf], tier=tier)
    if not flat:
        rep.add("|rho| nontrivial", tol["rho_min"], rho_norm[nf], kind="min", tier=tier)
    if len(ns) > 1:
        shrinking = dev[ns[-1]] <= dev[ns[-2]] or R.is_collapsed(dev[ns[-1]], dev[ns[-2]])
        slopes = R.refinement_slopes(ns, [dev[n] for n in ns])
        rep.add("deviation decreases under refinement", True, shrinking, kind="true", tier=tier,
                note="slopes " + ", ".join("-" if s is None else f"{s:.2f}" for s in slopes))
    if project and negative_control and sample.integrable:
        control = replace(sample, time_grid=(max(sample.time_grid, key=abs),),
                          seed=_control_seed(sample.seed, sample.dim))
        rows, _ = _main_at(control, control.build(nf), tol, project=False)
        rep.add("negative control: unprojected seed deviation", ric_tol,
                rows[0]["ric_deviation"], kind="min")
    return rep


# ----------------------------------------------------------- variation suite

def _variation_path(base):
    """A smooth non-geodesic path ``(g_t, Omega_t)`` through the base with compatible ``J_t``."""
    spec = base.spec
    x = spec.coords()
    frame = S.symmetric_frame(base.g, base.j)
    nf = frame.shape[-3]
    a = (np.cos(x[0] - x[1])[..., None, None] * frame[..., 0, :, :]
         + 0.5 * np.sin(x[-2] + x[-1])[..., None, None] * frame[..., nf - 1, :, :])
    phi = np.sin(x[0]) * np.cos(x[-1])
    return a, phi


def _ricci_variation_residual(spec, g0, w0, omega, a, phi, h, t0=0.0):
    """Central difference of the volume Chern-Ricci form vs its first-variation formula at ``t0``."""

    def state(t):
        g = F.sym(g0 @ F.matrix_exp(t * a, metric=g0))
        return g, F.normalize_density(spec, w0 * np.exp(t * phi))

    def ric(t):
        g, w = state(t)
        return CR.chern_ricci_volume(spec, AC.acs_from_metric(omega, g).j, w).form

    g, w = state(t0)
    conn = G.christoffel(spec, g)
    vstar = phi - F.quadrature(spec, phi * w)
    # g^{-1} dg/dt = a along this path
    field = G.weighted_divergence(spec, g, w, a, conn) + G.gradient(spec, g, vstar, conn.ginv)
    rhs = -G.lie_derivative(spec, field, np.broadcast_to(omega, spec.shape + omega.shape), "2-form")
    lhs = (ric(t0 + h) - ric(t0 - h)) / h  # derivative of 2 Ric, matching the normalization of rhs
    return F.sup_norm(lhs - rhs), F.sup_norm(rhs)


def run_variation_suite(sample, tol=None, steps=VARIATION_STEPS):
    """Finite-difference order checks of the two first-variation formulas.

    Also runs the static path (both sides vanish) and a volume-only path
    (``d/dt Ric = -dd^c Omega*``).
    """
    tol = tolerances(tol)
    rep = R.CampaignReport("variation", sample.name, _config(sample, tol, steps=list(steps)))
    tier = "hard" if sample.integrable else "reported"
    omega = None
    per_n = {}
    for n in sorted(sample.grids):
        base = sample.build(n)
        spec = base.spec
        omega = AC.standard_omega(spec.dim)
        a, phi = _variation_path(base)
        v = F.sym(base.g @ a)
        big_v = base.w * (phi - F.quadrature(spec, phi * base.w))
        div_res, ric_res = [], []
        for h in steps:
            div_res.append(G.divergence_variation_check(spec, base.g, base.w, v, big_v, h).residual_sup)
            ric, scale = _ricci_variation_residual(spec, base.g, base.w, omega, a, phi, h, t0=0.1)
            ric_res.append(ric)
            rep.rows.append({"N": n, "h": h, "divergence_variation": div_res[-1], "ricci_variation": ric,
                             "ricci_variation_scale": scale})
        per_n[n] = (div_res, ric_res, base, a, phi)
    nf = _finest(sample)
    div_res, ric_res, base, a, phi = per_n[nf]
    spec = base.spec
    for label, vals in (("divergence-variation", div_res), ("ricci-variation", ric_res)):
        if R.is_collapsed(*vals):
            rep.add(f"{label} slope", (tol["slope_lo"], tol["slope_hi"]), 2.0, kind="range", tier=tier,
                    note="all residuals at round-off")
        else:
            rep.add(f"{label} slope", (tol["slope_lo"], tol["slope_hi"]),
                    R.loglog_slope(steps, vals), kind="range", tier=tier,
                    note="residuals " + ", ".join(f"{r:.2e}" for r in vals))
    static, _ = _ricci_variation_residual(spec, base.g, base.w, omega, 0.0 * a, 0.0 * phi, steps[-1])
    rep.add("static path", tol["static"], static)
    h = steps[-1]
    w_p = F.normalize_density(spec, base.w * np.exp(h * phi))
    w_m = F.normalize_density(spec, base.w * np.exp(-h * phi))
    lhs = (CR.chern_ricci_volume(spec, base.j, w_p).form
           - CR.chern_ricci_volume(spec, base.j, w_m).form) / (2 * h)
    vstar = phi - F.quadrature(spec, phi * base.w)
    rep.add("volume-only path vs -ddc", tol["volume_only"], F.sup_norm(lhs + AC.ddc(spec, base.j, vstar)))
    return rep


# ------------------------------------------------------------ identity suite

def run_identity_suite(sample, tol=None, negative_control=True):
    """Residual table of the almost-Kähler identities over the sample's grids.

    Rows follow the identity-report layout: ``identity_id, sample_id, N,
    residual_sup, residual_l2, tier, convergence_slope``.
    """
    tol = tolerances(tol)
    rep = R.CampaignReport("identities", sample.name, _config(sample, tol))
    hard_sample = sample.integrable
    ns = sorted(sample.grids)
    table = {}
    for n in ns:
        base = sample.build(n)
        fields = CR.identity_residual_fields(base.spec, base.j, base.w)
        for key in CR.IDENTITY_IDS:
            table[key, n] = (F.sup_norm(fields[key]), F.l2_norm(base.spec, fields[key]))
    for key in CR.IDENTITY_IDS:
        sups = [table[key, n][0] for n in ns]
        slopes = R.refinement_slopes(ns, sups)
        tier = "hard" if hard_sample and (key in HARD_IDENTITIES or key == "functoriality") else "reported"
        for n, s in zip(ns, slopes):
            rep.rows.append({"identity_id": key, "sample_id": sample.name, "N": n,
                             "residual_sup": table[key, n][0], "residual_l2": table[key, n][1],
                             "tier": tier, "convergence_slope": s})
    nf = ns[-1]
    if hard_sample:
        for key in HARD_IDENTITIES:
            rep.add(f"{key} at N={nf}", tol["identity_hard"], table[key, nf][0])
        rep.add(f"functoriality at N={nf}", tol["functoriality"], table["functoriality", nf][0])
        if negative_control:
            base = sample.build(nf)
            x = base.spec.coords()
            bad = base.j * (1.0 + 0.01 * np.cos(x[0]))[..., None, None]
            res = CR.identity_residuals(base.spec, bad, base.w)
            rep.add("negative control: distorted J", tol["identity_hard"],
                    max(res[k] for k in HARD_IDENTITIES), kind="min")
    else:
        for key in CR.IDENTITY_IDS:
            rep.add(f"{key} at N={nf}", tol["identity_hard"], table[key, nf][0], tier="reported")
    complete = all(np.isfinite(table[k, n][0]) and np.isfinite(table[k, n][1])
                   for k in CR.IDENTITY_IDS for n in ns)
    rep.add("report complete", True, complete, kind="true")
    return rep


RUNNERS = {
    "f-conservation": run_f_conservation,
    "main-theorem": run_main_theorem,
    "variation": run_variation_suite,
    "identities": run_identity_suite,
}


def applicable(campaign, sample):
    """Whether ``campaign`` makes sense on ``sample`` (main theorem needs an F^J seed)."""
    if campaign == "main-theorem":
        return sample.seed.anti_invariant
    if campaign == "variation":
        return sample.base != "rotated-band-t4"
    return True


def run_campaign(name, sample, tol=None, **kwargs):
    if name not in RUNNERS:
        raise KeyError(f"unknown campaign {name!r}; choose from {CAMPAIGNS}")
    return RUNNERS[name](sample, tol, **kwargs)

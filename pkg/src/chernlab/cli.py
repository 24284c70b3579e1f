"""Command-line entry point.

Subcommands: ``geodesic``, ``verify``, ``convergence``, ``dump-sample``.
Exit codes: 0 pass, 1 hard-criterion failure, 2 runtime or domain error,
64 usage error.
"""
import argparse
import csv
import json
import logging
import math
import pathlib
import sys
from dataclasses import asdict, dataclass, field, fields

import numpy as np
import tomli

from . import almostcomplex as AC
from . import chernricci as CR
from . import fields as F
from . import geodesic as GD
from . import gspace as S
from .errors import ChernLabError, DegenerateVolume
from .experiments import campaigns as C
from .experiments import reports as R
from .experiments import samples as SM

EXIT_OK, EXIT_FAIL, EXIT_ERROR, EXIT_USAGE = 0, 1, 2, 64
TRAJECTORY_COLUMNS = ("t", "G_t", "mass_t", "min_u", "f_residual_norm", "ricci_invariance_norm")
CONVERGENCE_IDS = CR.IDENTITY_IDS + ("main-invariance", "f-residual")

log = logging.getLogger("chernlab")


class UsageError(Exception):
    pass


@dataclass
class Config:
    """Run configuration; every field can come from a file and most from flags."""

    grid: int = None
    dim: int = None
    scheme: str = None
    out: str = "chernlab-out"
    rng_seed: int = None
    samples: list = field(default_factory=list)
    tolerances: dict = field(default_factory=dict)
    times: list = None

    def validate(self):
        if self.grid is not None and (self.grid < 8 or self.grid % 2):
            raise UsageError(f"grid must be an even integer >= 8, got {self.grid}")
        if self.dim not in (None, 2, 4):
            raise UsageError(f"dim must be 2 or 4, got {self.dim}")
        if self.scheme not in (None,) + F.SCHEMES:
            raise UsageError(f"scheme must be one of {F.SCHEMES}, got {self.scheme!r}")
        if self.rng_seed is not None and not 0 <= self.rng_seed < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")
        try:
            C.tolerances(self.tolerances)
        except (KeyError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        return self

    def to_dict(self):
        return asdict(self)


def load_config(path):
    """Read a TOML config file, falling back to JSON; unknown keys are rejected."""
    text = pathlib.Path(path).read_text()
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{path}: neither TOML nor JSON ({exc})") from None
    known = {f.name for f in fields(Config)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise UsageError(f"{path}: unknown config keys {unknown}")
    return Config(**data)


def _parse_override(item):
    key, sep, val = item.partition("=")
    if not sep:
        raise UsageError(f"--tol-override expects KEY=VAL, got {item!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise UsageError(f"--tol-override {key}: {val!r} is not a number") from None


def build_config(args):
    cfg = load_config(args.config) if args.config else Config()
    for name, attr in (("grid", "grid"), ("dim", "dim"), ("scheme", "scheme"), ("out", "out"),
                       ("seed", "rng_seed")):
        val = getattr(args, name, None)
        if val is not None:
            setattr(cfg, attr, val)
    if getattr(args, "sample", None):
        cfg.samples = list(args.sample)
    cfg.tolerances = dict(cfg.tolerances)
    for item in args.tol_override or []:
        k, v = _parse_override(item)
        cfg.tolerances[k] = v
    return cfg.validate()


def select_samples(cfg, default=None):
    """Corpus samples picked by the config, with grid, scheme and seed applied."""
    try:
        chosen = SM.corpus_by_name(cfg.samples or default)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    if cfg.dim is not None:
        chosen = [s for s in chosen if s.dim == cfg.dim]
    out = []
    for s in chosen:
        if cfg.grid is not None:
            half = cfg.grid // 2
            s = s.with_grids((half, cfg.grid) if half >= 8 and half % 2 == 0 else (cfg.grid,))
        if cfg.scheme is not None:
            s = s.with_scheme(cfg.scheme)
        if cfg.rng_seed is not None:
            s = s.with_seed(rng_seed=cfg.rng_seed)
        if cfg.times is not None:
            s.time_grid = tuple(float(t) for t in cfg.times)
        out.append(s)
    if not out:
        raise UsageError("no sample matches the selection")
    return out


def _echo(cfg, command, **extra):
    payload = {"command": command, "config": cfg.to_dict()}
    payload.update(extra)
    print("config: " + json.dumps(payload, sort_keys=True))
    return payload


# ----------------------------------------------------------------- commands

def cmd_geodesic(cfg, args):
    """Evaluate one geodesic on a time list; write the trajectory CSV and field dumps."""
    sample = select_samples(cfg, [args.sample_name])[0]
    n = cfg.grid or max(sample.grids)
    times = [float(t) for t in (args.t or sample.time_grid)]
    echo = _echo(cfg, "geodesic", sample=sample.to_dict(), N=n, times=times)
    tol = C.tolerances(cfg.tolerances)
    base = sample.build(n)
    p = base.point
    j0 = base.j if sample.seed.anti_invariant else None
    t0 = S.project_to_F(p, S.make_seed(p, sample.seed, j0), j0, tol=tol["projection"])
    geo = GD.geodesic_init(p, t0)
    window = GD.existence_window(geo)
    print(f"G_0 = {geo.G0:.12e}; existence window ({window[0]:.6g}, {window[1]:.6g})")
    outside = [t for t in times if not window[0] < t < window[1]]
    if outside:
        raise DegenerateVolume(outside[0], window)
    omega = AC.standard_omega(sample.dim)
    rho = CR.chern_ricci_volume(base.spec, base.j, base.w).form if j0 is not None else None
    out = pathlib.Path(cfg.out)
    (out / "fields").mkdir(parents=True, exist_ok=True)
    rows = []
    for k, t in enumerate(times):
        q, speed = GD.evaluate(geo, t, window=window)
        u, udot = q.w / p.w, speed.big_v / p.w
        ric = math.nan
        if rho is not None:
            j_t = AC.acs_from_metric(omega, q.g).j
            ric = F.sup_norm(CR.chern_ricci_volume(q.spec, j_t, q.w).form - rho)
        rows.append({"t": t, "G_t": GD.energy(geo, u, udot), "mass_t": GD.mass(geo, u),
                     "min_u": float(u.min()), "f_residual_norm": S.f_residual(q, speed)[1],
                     "ricci_invariance_norm": ric})
        F.save_field(out / "fields" / f"g_t{k:03d}.gfld", F.GridField(q.spec, "sym2", q.g))
        F.save_field(out / "fields" / f"omega_t{k:03d}.gfld", F.GridField(q.spec, "top-form", q.w))
    with open(out / "trajectory.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(float(v)) for k, v in r.items()})
    echo["window"] = list(window)
    (out / "geodesic.json").write_text(json.dumps(R._clean(echo), sort_keys=True, indent=2) + "\n")
    print(f"wrote {len(rows)} time points to {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_verify(cfg, args):
    names = args.campaigns
    bad = [c for c in names if c not in C.CAMPAIGNS]
    if bad:
        raise UsageError(f"unknown campaigns {bad}; choose from {list(C.CAMPAIGNS)}")
    _echo(cfg, "verify", campaigns=names, corrupt_seed=args.corrupt_seed)
    out = pathlib.Path(cfg.out) / "reports"
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for name in names:
        for sample in select_samples(cfg):
            if not C.applicable(name, sample):
                continue
            kwargs = {}
            if args.corrupt_seed and name in ("f-conservation", "main-theorem"):
                kwargs["project"] = False
            log.info("running %s on %s", name, sample.name)
            rep = C.run_campaign(name, sample, cfg.tolerances, **kwargs)
            rep.config["cli"] = cfg.to_dict()
            R.write_report(rep, out)
            reports.append(rep)
    print(R.summary_table(reports))
    ok = all(r.passed for r in reports)
    summary = {"passed": ok, "reports": [{"campaign": r.campaign, "sample": r.sample,
                                          "passed": r.passed} for r in reports]}
    (out / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print("ALL HARD CRITERIA PASS" if ok else "HARD CRITERION FAILURE")
    return EXIT_OK if ok else EXIT_FAIL


def _convergence_rows(identity_id, sample, cfg):
    ns = sorted(sample.grids)
    if identity_id == "main-invariance":
        rep = C.run_main_theorem(sample, cfg.tolerances, negative_control=False)
        vals = [max(r["ric_deviation"] for r in rep.rows if r["N"] == n) for n in ns]
    elif identity_id == "f-residual":
        rep = C.run_f_conservation(sample, cfg.tolerances)
        vals = [max(r["f_residual"] for r in rep.rows if r["N"] == n) for n in ns]
    else:
        vals = []
        for n in ns:
            base = sample.build(n)
            vals.append(F.sup_norm(CR.identity_residual_fields(base.spec, base.j, base.w)[identity_id]))
    slopes = R.refinement_slopes(ns, vals)
    return [{"identity_id": identity_id, "sample_id": sample.name, "scheme": sample.scheme, "N": n,
             "residual_sup": v, "convergence_slope": s} for n, v, s in zip(ns, vals, slopes)]


def cmd_convergence(cfg, args):
    ident = args.identity
    if ident not in CONVERGENCE_IDS:
        print(f"error: unknown identity {ident!r}; known: {', '.join(CONVERGENCE_IDS)}", file=sys.stderr)
        return EXIT_ERROR
    _echo(cfg, "convergence", identity=ident)
    samples = select_samples(cfg)
    if ident == "main-invariance":
        samples = [s for s in samples if s.seed.anti_invariant]
    rows = []
    for s in samples:
        rows.extend(_convergence_rows(ident, s, cfg))
    out = pathlib.Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"convergence__{ident}.csv"
    path.write_text(R.rows_to_csv(rows))
    for r in rows:
        slope = "-" if r["convergence_slope"] is None else f"{r['convergence_slope']:.2f}"
        print(f"{r['sample_id']:<14} N={r['N']:<4} residual={r['residual_sup']:.3e}  slope={slope}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_dump_sample(cfg, args):
    sample = select_samples(cfg, [args.sample_name])[0]
    n = cfg.grid or max(sample.grids)
    _echo(cfg, "dump-sample", sample=sample.name, N=n)
    base = sample.build(n)
    out = pathlib.Path(cfg.out) / sample.name
    out.mkdir(parents=True, exist_ok=True)
    if base.g is not None:
        F.save_field(out / "g.gfld", F.GridField(base.spec, "sym2", base.g))
    F.save_field(out / "omega.gfld", F.GridField(base.spec, "top-form", base.w))
    F.save_field(out / "j.gfld", F.GridField(base.spec, "endo", base.j))
    meta = sample.to_dict()
    meta["N"] = n
    meta["integrable"] = base.integrable
    (out / "sample.json").write_text(json.dumps(R._clean(meta), sort_keys=True, indent=2) + "\n")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"geodesic": cmd_geodesic, "verify": cmd_verify, "convergence": cmd_convergence,
            "dump-sample": cmd_dump_sample}


# ------------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML (or JSON) configuration file")
    common.add_argument("--grid", type=int, help="grid points per axis")
    common.add_argument("--dim", type=int, choices=(2, 4))
    common.add_argument("--scheme", choices=F.SCHEMES)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="rng seed for sample seeds (u64)")
    common.add_argument("--tol-override", action="append", metavar="KEY=VAL")
    common.add_argument("--sample", action="append", help="restrict to a corpus sample (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="chernlab", description="Numerical checks of Chern-Ricci invariance "
                     "along G-geodesics on flat tori.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)
    g = sub.add_parser("geodesic", parents=[common], help="evaluate a geodesic on a time list")
    g.add_argument("sample_name", nargs="?", default="flat-generic")
    g.add_argument("--t", type=float, nargs="+", help="times to evaluate")
    v = sub.add_parser("verify", parents=[common], help="run verification campaigns")
    v.add_argument("campaigns", nargs="*", metavar="CAMPAIGN", help=f"any of {', '.join(C.CAMPAIGNS)}")
    v.add_argument("--corrupt-seed", action="store_true",
                   help="skip the projection onto F (negative control; should fail)")
    c = sub.add_parser("convergence", parents=[common], help="residual-vs-N slope table")
    c.add_argument("identity", help=f"one of {', '.join(CONVERGENCE_IDS)}")
    d = sub.add_parser("dump-sample", parents=[common], help="write a corpus sample's fields")
    d.add_argument("sample_name")
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on --help and on usage errors
        return exc.code
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "verify" and not args.campaigns:
        try:
            parser.error("verify needs at least one campaign")
        except SystemExit as exc:
            return exc.code
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(f"chernlab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateVolume as exc:
        print(f"chernlab: {exc}", file=sys.stderr)
        if exc.window is not None:
            print(f"existence window: ({exc.window[0]:.6g}, {exc.window[1]:.6g})", file=sys.stderr)
        return EXIT_ERROR
    except (ChernLabError, ValueError, OSError) as exc:
        print(f"chernlab: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

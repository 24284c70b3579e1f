"""Campaign reports: criteria bookkeeping, slopes, JSON and CSV writers."""
import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

COLLAPSE = 1e-11  # residuals below this sit at round-off; slopes are meaningless


@dataclass
class Criterion:
    """One checked statement with its tolerance and outcome.

    ``tier`` is ``"hard"`` (asserted) or ``"reported"`` (logged only);
    ``kind`` is ``"max"`` (pass iff ``value <= tolerance``), ``"min"``
    (pass iff ``value >= tolerance``) or ``"range"`` (``tolerance`` is a pair).
    """

    name: str
    tolerance: object
    value: float
    tier: str = "hard"
    kind: str = "max"
    note: str = ""
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = evaluate_criterion(self.value, self.tolerance, self.kind)


def evaluate_criterion(value, tolerance, kind):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return False
    if kind == "max":
        return value <= tolerance
    if kind == "min":
        return value >= tolerance
    if kind == "range":
        lo, hi = tolerance
        return lo <= value <= hi
    if kind == "true":
        return bool(value)
    raise ValueError(f"unknown criterion kind {kind!r}")


@dataclass
class CampaignReport:
    campaign: str
    sample: str
    config: dict
    criteria: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def add(self, *args, **kwargs):
        c = Criterion(*args, **kwargs)
        self.criteria.append(c)
        return c

    @property
    def hard(self):
        return [c for c in self.criteria if c.tier == "hard"]

    @property
    def passed(self):
        return all(c.passed for c in self.hard)

    def failures(self):
        return [c for c in self.hard if not c.passed]

    def criterion(self, name):
        for c in self.criteria:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self):
        return _clean({
            "campaign": self.campaign,
            "sample": self.sample,
            "passed": self.passed,
            "config": self.config,
            "criteria": [asdict(c) for c in self.criteria],
            "rows": self.rows,
        })

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _clean(obj):
    """Make an object JSON-safe: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def loglog_slope(xs, ys):
    """Least-squares slope of ``log y`` against ``log x``; ``nan`` if any ``y <= 0``."""
    xs, ys = np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)
    if len(xs) < 2 or np.any(ys <= 0):
        return float("nan")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def refinement_slopes(ns, values):
    """Convergence rates between consecutive grids, ``-log(r_k+1 / r_k) / log(N_k+1 / N_k)``.

    The first entry is ``None``.  Positive numbers mean the residual shrinks.
    """
    out = [None]
    for (n0, r0), (n1, r1) in zip(zip(ns, values), zip(ns[1:], values[1:])):
        if r0 <= 0 or r1 <= 0:
            out.append(None)
        else:
            out.append(-math.log(r1 / r0) / math.log(n1 / n0))
    return out


def is_collapsed(*values):
    return all(v <= COLLAPSE for v in values)


def rows_to_csv(rows):
    """CSV text for a list of dicts; columns in first-seen order."""
    cols = []
    for r in rows:
        for k in r:
            if k not in cols:
                cols.append(k)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r.get(k)) for k in cols})
    return buf.getvalue()


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_report(report, directory, stem=None):
    """Write ``<stem>.json`` and ``<stem>.csv``; returns the two paths."""
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{report.campaign}__{report.sample}"
    jp, cp = directory / f"{stem}.json", directory / f"{stem}.csv"
    jp.write_text(report.to_json() + "\n")
    cp.write_text(rows_to_csv(report.rows))
    return jp, cp


def summary_table(reports):
    """Plain-text summary: one line per criterion."""
    lines = [f"{'campaign':<16} {'sample':<14} {'criterion':<34} {'tier':<8} {'value':>11}  result"]
    for rep in reports:
        for c in rep.criteria:
            val = "n/a" if c.value is None else (
                f"{c.value:11.3e}" if isinstance(c.value, float) else str(c.value))
            res = ("PASS" if c.passed else "FAIL") if c.tier == "hard" else "logged"
            lines.append(f"{rep.campaign:<16} {rep.sample:<14} {c.name:<34} {c.tier:<8} {val:>11}  {res}")
    return "\n".join(lines)

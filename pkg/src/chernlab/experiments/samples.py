"""Sample corpus: base structures ``(g_0, Omega_0, J_0)`` and seeds."""
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .. import almostcomplex as AC
from .. import fields as F
from ..gspace import SeedSpec, StructurePoint

BASES = ("flat", "conformal-sl2", "rotated-j-t4", "rotated-band-t4")


@dataclass
class Base:
    spec: F.GridSpec
    g: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    j: np.ndarray = field(repr=False)
    integrable: bool = True

    @property
    def point(self):
        return StructurePoint(self.spec, self.g, self.w)


@dataclass
class SampleSpec:
    name: str
    dim: int
    base: str
    grids: tuple
    seed: SeedSpec = field(default_factory=SeedSpec)
    time_grid: tuple = (-0.2, -0.1, 0.0, 0.1, 0.2)
    amplitude: float = 0.0
    volume_amplitude: float = 0.0
    scheme: str = "spectral"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base recipe {self.base!r}")
        if self.dim not in (2, 4):
            raise ValueError("samples live on T^2 or T^4")
        self.grids = tuple(int(n) for n in self.grids)
        self.time_grid = tuple(float(t) for t in self.time_grid)

    @property
    def integrable(self):
        return self.dim == 2 or self.base == "flat"

    def with_grids(self, grids):
        return replace(self, grids=tuple(grids))

    def with_scheme(self, scheme):
        return replace(self, scheme=scheme)

    def with_seed(self, **changes):
        return replace(self, seed=replace(self.seed, **changes))

    def to_dict(self):
        d = asdict(self)
        d["grids"] = list(self.grids)
        d["time_grid"] = list(self.time_grid)
        return d

    def build(self, n):
        return build_base(self, n)


def _volume(spec, amp):
    x = spec.coords()
    if amp == 0.0:
        return F.uniform_density(spec)
    if spec.dim == 2:
        raw = np.exp(amp * (1.5 * np.sin(x[1]) + np.cos(x[0])))
    else:
        raw = np.exp(amp * (np.cos(x[0]) + 0.5 * np.sin(x[3]) + 0.5 * np.cos(x[1] - x[2])))
    return F.normalize_density(spec, raw)


def _anti_invariant_pair(rng_seed):
    """Two fixed symmetric matrices anticommuting with the standard J on R^4."""
    rng = np.random.default_rng(rng_seed)
    j0 = AC.standard_j(4)
    out = []
    for _ in range(2):
        s = rng.normal(size=(4, 4))
        a = AC.anti_invariant_part(j0, s + s.T)
        out.append(a / np.linalg.norm(a))
    return out


def quaternionic_k():
    """A constant complex structure on R^4 anticommuting with the standard one."""
    return np.array([[0.0, -1.0, 0.0, 0.0], [1.0, 0.0, 0.0, 0.0],
                     [0.0, 0.0, 0.0, 1.0], [0.0, 0.0, -1.0, 0.0]])


def build_base(sample, n):
    spec = F.GridSpec(sample.dim, n, sample.scheme)
    x = spec.coords()
    omega = AC.standard_omega(spec.dim)
    w = _volume(spec, sample.volume_amplitude)
    eps = sample.amplitude
    if sample.base == "flat":
        g = F.identity(spec)
        return Base(spec, g, w, AC.acs_from_metric(omega, g).j, True)
    if sample.base == "conformal-sl2":
        if spec.dim != 2:
            raise ValueError("conformal-sl2 base lives on T^2")
        e1 = np.diag([1.0, -1.0])
        e2 = np.array([[0.0, 1.0], [1.0, 0.0]])
        a = eps * ((np.cos(x[0]) + 0.5 * np.sin(x[1]))[..., None, None] * e1
                   + 0.7 * np.cos(x[0] + x[1])[..., None, None] * e2)
        g = F.sym(F.matrix_exp(a))
        return Base(spec, g, w, AC.acs_from_metric(omega, g).j, True)
    if spec.dim != 4:
        raise ValueError(f"{sample.base} base lives on T^4")
    k = np.asarray(sample.params.get("mode", [1, 0, 0, 1]), dtype=float)
    phase = sum(k[i] * x[i] for i in range(4))
    if sample.base == "rotated-j-t4":
        a1, a2 = _anti_invariant_pair(int(sample.params.get("matrix_seed", 7)))
        a = eps * (np.cos(phase)[..., None, None] * a1 + np.sin(phase)[..., None, None] * a2)
        g = F.sym(F.matrix_exp(a))  # J = exp(-a) J_std is a pointwise conjugate of J_std
        return Base(spec, g, w, AC.acs_from_metric(omega, g).j, False)
    # far-rotated structure cos(theta) J_std + sin(theta) K: not omega-compatible past pi/2
    theta = float(sample.params.get("theta", 3.0)) + eps * np.cos(phase)
    j = (np.cos(theta)[..., None, None] * AC.standard_j(4)
         + np.sin(theta)[..., None, None] * quaternionic_k())
    return Base(spec, None, w, j, False)


_FOURIER_T2 = SeedSpec("fourier", [[2, 3], [4, 1], [3, 3]], [0.2, 0.2, 0.15], True, 3)
_FOURIER_T4 = SeedSpec("fourier", [[1, 0, 0, 1], [0, 1, 1, 0]], [0.1, 0.1], True, 3)
_T2_GRIDS = (16, 32, 64)
_T4_GRIDS = (8, 12, 16)
_T2_TIMES = tuple(np.round(np.linspace(-0.2, 0.2, 9), 12))
_T4_TIMES = (-0.1, -0.05, 0.0, 0.05, 0.1)


def default_corpus():
    """The eight-sample ladder from flat to non-integrable."""
    return [
        SampleSpec("flat-constant", 2, "flat", _T2_GRIDS,
                   SeedSpec("constant", [], [0.3, 0.2], True, 0), _T2_TIMES),
        SampleSpec("flat-fourier", 2, "flat", _T2_GRIDS, _FOURIER_T2, _T2_TIMES),
        SampleSpec("flat-generic", 2, "flat", _T2_GRIDS,
                   SeedSpec("fourier", [[1, 0], [0, 1], [1, 1]], [0.3, 0.2, 0.1], False, 3), _T2_TIMES),
        SampleSpec("curved-0.05", 2, "conformal-sl2", _T2_GRIDS, _FOURIER_T2, _T2_TIMES, 0.05, 0.2),
        SampleSpec("curved-0.1", 2, "conformal-sl2", _T2_GRIDS, _FOURIER_T2, _T2_TIMES, 0.1, 0.2),
        SampleSpec("curved-0.2", 2, "conformal-sl2", _T2_GRIDS, _FOURIER_T2, _T2_TIMES, 0.2, 0.2),
        SampleSpec("t4-a", 4, "rotated-j-t4", _T4_GRIDS, _FOURIER_T4, _T4_TIMES, 0.3, 0.2,
                   params={"mode": [1, 0, 0, 1], "matrix_seed": 7}),
        SampleSpec("t4-b", 4, "rotated-j-t4", _T4_GRIDS, _FOURIER_T4, _T4_TIMES, 0.2, 0.2,
                   params={"mode": [0, 1, 1, 0], "matrix_seed": 11}),
    ]


def degenerate_witness(n=8):
    """A T^4 structure rotated into the band where the canonical frame collapses."""
    return SampleSpec("t4-degenerate", 4, "rotated-band-t4", (n,), amplitude=0.1,
                      params={"theta": 3.0, "mode": [1, 0, 0, 0]})


def corpus_by_name(names=None, corpus=None):
    corpus = default_corpus() if corpus is None else corpus
    if not names:
        return corpus
    table = {s.name: s for s in corpus}
    missing = [n for n in names if n not in table]
    if missing:
        raise KeyError(f"unknown samples {missing}")
    return [table[n] for n in names]

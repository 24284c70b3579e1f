"""Tensor fields sampled on a uniform periodic grid over the flat torus.

Arrays carry the grid axes first (``spec.shape``) and tensor components
last, in the coordinate frame.  Index conventions used across the package:

* vector ``xi[..., i]``, 1-form ``beta[..., i]``
* symmetric 2-tensor / 2-form ``T[..., i, j]``
* endomorphism ``A[..., i, j] = A^i_j`` so that ``(A xi)^i = A^i_j xi^j``
* a derivative index, when present, is the first component axis:
  ``partials(f)[..., k, ...] = d_k f``
"""
from dataclasses import dataclass, field
import json
import math
from pathlib import Path

import numpy as np

from .errors import NonDiagonalizable, SingularMetric, UnsupportedRank

TWO_PI = 2.0 * np.pi

SCHEMES = ("spectral", "central4")

# number of coordinate indices carried by each rank
RANK_ORDER = {
    "scalar": 0,
    "top-form": 0,
    "vector": 1,
    "1-form": 1,
    "sym2": 2,
    "endo": 2,
    "2-form": 2,
    "vector-2-form": 3,
    "3-form": 3,
    "christoffel": 3,
    "riemann": 4,
}


@dataclass(frozen=True)
class GridSpec:
    dim: int
    n: int
    scheme: str = "spectral"

    def __post_init__(self):
        if self.dim not in (2, 4):
            raise ValueError(f"dim must be 2 or 4, got {self.dim}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"resolution must be even and >= 8, got {self.n}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown derivative scheme {self.scheme!r}")

    @property
    def shape(self):
        return (self.n,) * self.dim

    @property
    def h(self):
        return TWO_PI / self.n

    @property
    def cell_volume(self):
        return self.h ** self.dim

    @property
    def half_dim(self):
        return self.dim // 2

    def coords(self):
        """Coordinate arrays ``x[0] .. x[d-1]``, each of shape ``spec.shape``."""
        x1 = self.h * np.arange(self.n)
        return np.meshgrid(*([x1] * self.dim), indexing="ij")

    def with_scheme(self, scheme):
        return GridSpec(self.dim, self.n, scheme)

    def with_n(self, n):
        return GridSpec(self.dim, n, self.scheme)

    def to_dict(self):
        return {"dim": self.dim, "n": self.n, "scheme": self.scheme, "period": TWO_PI}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["dim"]), int(d["n"]), d.get("scheme", "spectral"))


def component_shape(rank, dim):
    try:
        return (dim,) * RANK_ORDER[rank]
    except KeyError:
        raise UnsupportedRank(f"unknown rank {rank!r}") from None


@dataclass
class GridField:
    """A sampled field with its rank signature, used for storage and exchange."""

    spec: GridSpec
    rank: str
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        expect = self.spec.shape + component_shape(self.rank, self.spec.dim)
        if self.values.shape != expect:
            raise ValueError(f"{self.rank} field needs shape {expect}, got {self.values.shape}")
        if self.rank == "sym2" and not np.array_equal(self.values, np.swapaxes(self.values, -1, -2)):
            raise ValueError("sym2 field is not exactly symmetric")
        if self.rank == "2-form" and not np.array_equal(self.values, -np.swapaxes(self.values, -1, -2)):
            raise ValueError("2-form field is not exactly antisymmetric")

    @property
    def is_complex(self):
        return np.iscomplexobj(self.values)


# --------------------------------------------------------------------- I/O

_MAGIC = b"GFLD1\n"


def save_field(path, f: GridField):
    """Write ``f`` as a ``.gfld`` file: magic line, JSON header line, raw little-endian payload."""
    dtype = np.dtype(np.complex128 if f.is_complex else np.float64).newbyteorder("<")
    header = {"spec": f.spec.to_dict(), "rank": f.rank, "dtype": dtype.str,
              "shape": list(f.values.shape)}
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(np.ascontiguousarray(f.values, dtype=dtype).tobytes(order="C"))


def load_field(path) -> GridField:
    with open(path, "rb") as fh:
        if fh.readline() != _MAGIC:
            raise ValueError(f"{path}: not a .gfld file")
        header = json.loads(fh.readline())
        dtype = np.dtype(header["dtype"])
        data = np.frombuffer(fh.read(), dtype=dtype)
    spec = GridSpec.from_dict(header["spec"])
    values = data.reshape(header["shape"]).astype(dtype.newbyteorder("="))
    return GridField(spec, header["rank"], values)


# ----------------------------------------------------------- differentiation

def _wavenumbers(n):
    k = np.fft.fftfreq(n, 1.0 / n)
    k[n // 2] = 0.0  # odd derivative of the Nyquist mode is dropped
    return k


def derive(spec: GridSpec, f, axis):
    """Partial derivative of every component of ``f`` along grid axis ``axis``."""
    if not 0 <= axis < spec.dim:
        raise ValueError(f"axis {axis} out of range for dim {spec.dim}")
    f = np.asarray(f)
    if spec.scheme == "central4":
        h = spec.h
        return (8.0 * (np.roll(f, -1, axis) - np.roll(f, 1, axis))
                - (np.roll(f, -2, axis) - np.roll(f, 2, axis))) / (12.0 * h)
    n = spec.n
    bshape = [1] * f.ndim
    if np.iscomplexobj(f):
        bshape[axis] = n
        ik = (1j * _wavenumbers(n)).reshape(bshape)
        return np.fft.ifft(ik * np.fft.fft(f, axis=axis), axis=axis)
    bshape[axis] = n // 2 + 1
    k = np.arange(n // 2 + 1, dtype=float)
    k[-1] = 0.0
    ik = (1j * k).reshape(bshape)
    return np.fft.irfft(ik * np.fft.rfft(f, axis=axis), n=n, axis=axis)


def partials(spec: GridSpec, f):
    """All first partials, stacked as the first component axis."""
    f = np.asarray(f)
    d = spec.dim
    out = np.stack([derive(spec, f, k) for k in range(d)], axis=d)
    return out


def exterior_derivative(spec: GridSpec, alpha, degree):
    """Exterior derivative of a ``degree``-form stored as a fully antisymmetric array.

    Components are the values on coordinate vectors, so for a 1-form
    ``(d beta)_ij = d_i beta_j - d_j beta_i``.
    """
    if degree == 0:
        return partials(spec, alpha)
    d = spec.dim
    p = partials(spec, alpha)
    out = np.zeros_like(p)
    for a in range(degree + 1):
        term = np.moveaxis(p, d, d + a)
        out = out + term if a % 2 == 0 else out - term
    return out


def laplacian_flat(spec: GridSpec, f):
    return sum(derive(spec, derive(spec, f, k), k) for k in range(spec.dim))


def quadrature(spec: GridSpec, f):
    """Integral over the torus of a scalar (or top-form density) field."""
    f = np.asarray(f)
    axes = tuple(range(spec.dim))
    return np.sum(f, axis=axes) * spec.cell_volume


# ------------------------------------------------------------ pointwise algebra

def identity(spec: GridSpec):
    return np.broadcast_to(np.eye(spec.dim), spec.shape + (spec.dim, spec.dim)).copy()


def transpose(a):
    return np.swapaxes(a, -1, -2)


def sym(a):
    return 0.5 * (a + transpose(a))


def matmul(*mats):
    out = mats[0]
    for m in mats[1:]:
        out = out @ m
    return out


def inv(a):
    try:
        return np.linalg.inv(a)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric(str(exc)) from exc


def g_transpose(g, a, ginv=None):
    """Transpose of an endomorphism with respect to ``g``: ``g^{-1} A^* g``."""
    if ginv is None:
        ginv = inv(g)
    return ginv @ transpose(a) @ g


def metric_sqrt(g):
    """Pointwise ``g^{1/2}`` and ``g^{-1/2}`` for a symmetric positive definite field."""
    lam, q = np.linalg.eigh(sym(g))
    if np.any(lam <= 0):
        raise SingularMetric(f"metric not positive definite (min eigenvalue {lam.min():.3e})")
    s = np.sqrt(lam)
    root = (q * s[..., None, :]) @ transpose(q)
    iroot = (q / s[..., None, :]) @ transpose(q)
    return root, iroot


def matrix_exp(a, metric=None, tol=1e-10):
    """Pointwise exponential of an endomorphism field.

    With ``metric`` given, ``a`` must be symmetric for that metric; the
    exponential is computed from the symmetric eigendecomposition of
    ``g^{1/2} a g^{-1/2}``.  Without it, symmetric ``a`` uses ``eigh`` and
    anything else falls back to a real-spectrum eigendecomposition.
    """
    a = np.asarray(a, dtype=float)
    if metric is not None:
        root, iroot = metric_sqrt(metric)
        s = root @ a @ iroot
    else:
        root = iroot = None
        s = a
    skew = np.max(np.abs(s - transpose(s)), initial=0.0)
    scale = max(1.0, float(np.max(np.abs(s), initial=0.0)))
    if skew <= tol * scale:
        lam, q = np.linalg.eigh(sym(s))
        e = (q * np.exp(lam)[..., None, :]) @ transpose(q)
        if root is not None:
            e = iroot @ e @ root
        return e
    if metric is not None:
        raise NonDiagonalizable(f"argument is not metric-symmetric (asymmetry {skew:.3e})")
    lam, vec = np.linalg.eig(a)
    if np.max(np.abs(lam.imag), initial=0.0) > tol * scale:
        raise NonDiagonalizable("endomorphism has non-real spectrum")
    e = (vec * np.exp(lam)[..., None, :]) @ np.linalg.inv(vec)
    return e.real


def inner_sym(g, u, v, ginv=None):
    """Pointwise ``<u, v>_g = Tr((g^{-1} u)(g^{-1} v))`` for symmetric 2-tensors."""
    if ginv is None:
        ginv = inv(g)
    return np.einsum("...ij,...ji->...", ginv @ u, ginv @ v)


def inner_endo(g, a, b, ginv=None):
    """Pointwise ``<A, B>_g = Tr(A B^T_g)`` for endomorphisms."""
    return np.einsum("...ij,...ji->...", a, g_transpose(g, b, ginv))


def sqrt_det(g):
    det = np.linalg.det(g)
    if np.any(det <= 0):
        raise SingularMetric("metric determinant is not positive")
    return np.sqrt(det)


def check_metric(g, name="metric"):
    """Raise unless ``g`` is pointwise symmetric positive definite."""
    g = np.asarray(g)
    if not np.allclose(g, transpose(g), rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
        raise ValueError(f"{name} is not symmetric")
    lam = np.linalg.eigvalsh(sym(g))
    if lam.min() <= 0:
        raise SingularMetric(f"{name} not positive definite (min eigenvalue {lam.min():.3e})")
    return g


def check_volume(spec: GridSpec, w, unit_mass=True, tol=1e-12):
    """Raise unless ``w`` is a positive density, of unit mass when requested."""
    w = np.asarray(w)
    if np.any(w <= 0):
        raise ValueError("volume density must be positive")
    if unit_mass:
        mass = quadrature(spec, w)
        if abs(mass - 1.0) > tol:
            raise ValueError(f"volume form has mass {mass!r}, expected 1")
    return w


def normalize_density(spec: GridSpec, w):
    return w / quadrature(spec, w)


def uniform_density(spec: GridSpec):
    return np.full(spec.shape, TWO_PI ** (-spec.dim))


def sup_norm(a):
    return float(np.max(np.abs(a), initial=0.0))


def l2_norm(spec: GridSpec, a):
    """Flat L2 norm of all components."""
    a = np.abs(np.asarray(a)) ** 2
    extra = tuple(range(spec.dim, a.ndim))
    if extra:
        a = a.sum(axis=extra)
    return math.sqrt(float(quadrature(spec, a)))

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chernlab import fields as F
from chernlab.experiments import samples as SM

settings.register_profile("chernlab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("chernlab")


@pytest.fixture(scope="session")
def curved32():
    """Curved integrable T^2 sample (conformal SL(2) metric, nonuniform volume) at N = 32."""
    return SM.corpus_by_name(["curved-0.2"])[0].build(32)


@pytest.fixture(scope="session")
def flat32():
    return SM.corpus_by_name(["flat-fourier"])[0].build(32)


@pytest.fixture(scope="session")
def t4a8():
    return SM.corpus_by_name(["t4-a"])[0].build(8)


def random_smooth(spec, rng, kmax=2, amp=1.0, shape=()):
    """Band-limited random field with the given component shape."""
    x = spec.coords()
    out = np.zeros(spec.shape + tuple(shape))
    for k in np.ndindex(*(2 * kmax + 1,) * spec.dim):
        k = np.array(k) - kmax
        phase = sum(k[i] * x[i] for i in range(spec.dim))
        c = rng.normal(size=(2,) + tuple(shape)) * amp / (1.0 + k @ k)
        out += np.cos(phase)[(...,) + (None,) * len(shape)] * c[0]
        out += np.sin(phase)[(...,) + (None,) * len(shape)] * c[1]
    return out


def random_metric(spec, rng, eps=0.2):
    a = random_smooth(spec, rng, kmax=1, amp=eps, shape=(spec.dim, spec.dim))
    return F.sym(F.matrix_exp(F.sym(a)))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

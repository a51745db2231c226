import numpy as np
import pytest
import scipy.fft as sfft

from yamabe_lab.manifold import Manifold
from yamabe_lab.spectral import Field

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("] ", 1)[1].split(".", 1)[0])):
            terminalreporter.write_line(line)


def quotient_ld(man: Manifold, values, L: float) -> np.longdouble:
    """Extended-precision Q written independently of the package kernels.

    Used as a finite-difference oracle: second differences need more than
    double precision to show their O(h^2) behaviour at h = 1e-4.
    """
    ld = np.longdouble
    u = np.asarray(values, dtype=ld)
    N = u.size
    k = np.arange(N // 2 + 1, dtype=ld) / ld(L)
    c = sfft.rfft(u)
    du2 = sfft.irfft(c * (-(k**2)), n=N)
    w = ld(2) * ld(np.pi) * ld(L) / ld(N) * ld(man.sphere_volume)
    p = ld(2 * man.n) / ld(man.n - 2)
    cn = ld(4 * (man.n - 1)) / ld(man.n - 2)
    R = ld((man.n - 1) * (man.n - 2))
    E = w * np.sum(u * (-cn * du2 + R * u))
    V = w * np.sum(u**p)
    return E / V ** (ld(2) / p)


def smooth_positive(grid, rng, modes: int = 6, amp: float = 0.2) -> Field:
    theta = grid.theta
    vals = np.ones(grid.N)
    for k in range(1, modes + 1):
        a, b = rng.standard_normal(2) * amp / k**2
        vals += a * np.cos(k * theta) + b * np.sin(k * theta)
    return Field(grid, vals)


def on_B(man: Manifold, f: Field) -> Field:
    vol = f.grid.weight * np.sum(f.values**man.p_star)
    return f / vol ** (1.0 / man.p_star)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def degenerate():
    """(manifold, constant) at n = 3, L = 1."""
    man = Manifold(3, 1.0)
    return man, man.constant(man.grid(256))


@pytest.fixture(scope="session")
def reduction_L1(degenerate):
    from yamabe_lab.reduction import LyapunovSchmidt

    man, v = degenerate
    return LyapunovSchmidt(man, v)


@pytest.fixture(scope="session")
def model_L1(reduction_L1):
    from yamabe_lab.reduction import taylor_of_q

    return taylor_of_q(reduction_L1)


@pytest.fixture(scope="session")
def minimizer_L12():
    from yamabe_lab.solver import minimize, seed_field

    man = Manifold(3, 1.2)
    grid = man.grid(256)
    return man, minimize(man, seed_field(man, grid, 0.1, phase=0.3))

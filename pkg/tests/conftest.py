import numpy as np
import pytest

from nlch.grid import build_grid, build_kernel
from nlch.model import ModelParams, Source


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def grid1():
    return build_grid(1, 64, 1.0)


@pytest.fixture
def kernel1(grid1):
    return build_kernel(grid1, 0.125)


@pytest.fixture
def grid2():
    return build_grid(2, 32, 1.0)


@pytest.fixture
def kernel2(grid2):
    return build_kernel(grid2, 0.125)


@pytest.fixture
def growth():
    return ModelParams(gamma=10.0, p_h=0.7, eps=0.125, source=Source.GROWTH)


@pytest.fixture
def nosource():
    return ModelParams(gamma=10.0, p_h=0.7, eps=0.125, source=Source.NONE)


def smooth_field(grid, seed=0):
    """Positive smooth test density (a few low Fourier modes)."""
    rng = np.random.default_rng(seed)
    u = np.full(grid.shape, 0.5)
    xs = grid.coords()
    for _ in range(3):
        k = rng.integers(1, 4, size=grid.dim)
        phase = sum(2 * np.pi * kk * x / grid.length for kk, x in zip(k, xs))
        u = u + 0.1 * rng.random() * np.cos(phase + rng.random() * 6.28)
    return u


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for tag in sorted(results, key=lambda s: int(s[2:])):
        terminalreporter.write_line(f"{tag}: {'PASS' if results[tag] else 'FAIL'}")

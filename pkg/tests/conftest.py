import numpy as np
import pytest
from hypothesis import settings

from wickscft.functionals import ExternalPotential
from wickscft.grid import Grid1D

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


@pytest.fixture
def grid256():
    return Grid1D(256, 20.0)


@pytest.fixture
def harmonic256(grid256):
    return ExternalPotential.harmonic(1.0).evaluate(grid256)


def smooth_random(grid, rng, n_modes=6, complex_=False):
    """Band-limited random periodic samples."""
    r = grid.r
    out = np.zeros(grid.n_points, dtype=complex if complex_ else float)
    for m in range(n_modes):
        k = 2 * np.pi * m / grid.length
        a, b = rng.normal(size=2)
        out = out + a * np.cos(k * r) + b * np.sin(k * r)
        if complex_:
            c, d = rng.normal(size=2)
            out = out + 1j * (c * np.cos(k * r) + d * np.sin(k * r))
    return out


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion.

    Call with the criterion label, a pass flag, and a short measured summary.
    The line is printed in the terminal summary and the flag is asserted.
    """

    def record(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

import numpy as np
import pytest

from nsp2d.spectral import Grid2D, SpectralField

# PASS/FAIL lines collected by the acceptance suite, echoed in the summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def grid():
    return Grid2D(32, 8 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_real(grid, rng, scale=1.0):
    """Dealiased random real field (Nyquist removed so inverse is exact)."""
    phys = rng.standard_normal((grid.n, grid.n))
    return SpectralField(grid, grid.dealias(grid.forward(phys)) * scale)


def random_field(grid, rng):
    return SpectralField.from_physical(grid, rng.standard_normal((grid.n, grid.n)))

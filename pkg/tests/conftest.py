import numpy as np
import pytest

from anisob.spectral import Grid, SpectralField, hermitian_symmetrize


@pytest.fixture(scope="session")
def grid64():
    return Grid(64, 64)


@pytest.fixture(scope="session")
def grid128():
    return Grid(128, 128)


def random_field(grid, seed, kmin=1.0, kmax=None, decay=2.0):
    """Random real band-limited field with unit-ish amplitude."""
    if kmax is None:
        kmax = grid.dealias_radius
    rng = np.random.default_rng(seed)
    band = (grid.abs_modes >= kmin) & (grid.abs_modes <= kmax)
    coeffs = np.where(
        band,
        (1.0 + grid.abs_modes) ** (-decay)
        * np.exp(1j * rng.uniform(0, 2 * np.pi, size=band.shape)),
        0.0,
    )
    return SpectralField(grid, hermitian_symmetrize(coeffs))


def mode_field(grid, m1, m2, amp=1.0):
    """Exact single real mode ``amp * cos(m1 x1 + m2 x2)`` built in Fourier."""
    f = SpectralField.zero(grid)
    f.coeffs[m1 % grid.n1, m2 % grid.n2] = amp / 2.0
    f.coeffs[-m1 % grid.n1, -m2 % grid.n2] += amp / 2.0
    return f


def physical_inner(f, g):
    """Quadrature L2 inner product, independent of the Parseval route."""
    return float(np.sum(f.values() * g.values()) * f.grid.cell_area)


@pytest.fixture
def rand_field(grid64):
    return random_field(grid64, seed=42)

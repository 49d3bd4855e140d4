import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nsp2d.spectral import (CutoffFamily, Grid2D, SpectralField, apply_multiplier, band_split,
                            chi1, chi2, chi3, leray_split, littlewood_paley_symbols,
                            poisson_solve, smooth_step)

from conftest import random_field, random_real


def test_round_trip(grid, rng):
    phys = rng.standard_normal((grid.n, grid.n))
    back = SpectralField.from_physical(grid, phys).physical()
    assert np.max(np.abs(back - phys)) <= 1e-12 * np.max(np.abs(phys))


def test_coefficient_convention_single_mode():
    g = Grid2D(16, 2 * np.pi)
    f = SpectralField.from_physical(g, np.cos(3 * g.x1))
    c = f.coefficients
    assert abs(c[3, 0] - 0.5) < 1e-14 and abs(c[-3, 0] - 0.5) < 1e-14
    c2 = c.copy()
    c2[3, 0] = c2[-3, 0] = 0
    assert np.max(np.abs(c2)) < 1e-14


def test_bad_grid_rejected():
    with pytest.raises(ValueError):
        Grid2D(15)
    with pytest.raises(ValueError):
        Grid2D(16, -1.0)


def test_identity_multiplier_bitwise(grid, rng):
    f = random_field(grid, rng)
    out = apply_multiplier(f, lambda k1, k2: np.ones_like(k1))
    assert np.array_equal(out.coefficients, f.coefficients)


def test_bracket_on_cosine():
    g = Grid2D(32, 16 * np.pi)
    k = 2 * np.pi / g.length
    f = SpectralField.from_physical(g, 3.0 * np.cos(k * g.x1))
    out = apply_multiplier(f, g.kbracket)
    np.testing.assert_allclose(out.physical(), np.sqrt(1 + k * k) * f.physical(), atol=1e-12)


def test_composition_of_abs_symbol(grid, rng):
    f = random_real(grid, rng)
    twice = apply_multiplier(apply_multiplier(f, grid.kabs), grid.kabs)
    once = apply_multiplier(f, grid.ksq)
    assert (twice - once).l2() <= 1e-12 * once.l2()


def test_nonfinite_symbol_names_mode(grid, rng):
    f = random_field(grid, rng)
    with np.errstate(divide="ignore"):
        sym = 1.0 / grid.kabs
    with pytest.raises(ValueError, match=r"\(m1, m2\) = \(0, 0\)"):
        apply_multiplier(f, sym)
    apply_multiplier(f, sym, zero_mode=0.0)


def test_poisson_single_mode():
    g = Grid2D(32, 10.0)
    k = 2 * np.pi / g.length
    phi = poisson_solve(SpectralField.from_physical(g, np.cos(k * g.x1))).physical()
    np.testing.assert_allclose(phi, -(g.length / (2 * np.pi)) ** 2 * np.cos(k * g.x1), atol=1e-12)


def test_poisson_constant_gauge(grid):
    phi = poisson_solve(SpectralField.from_physical(grid, np.full((grid.n, grid.n), 2.5)))
    assert np.max(np.abs(phi.physical())) == 0.0


def test_poisson_residual(grid, rng):
    rho = random_field(grid, rng)
    rho = SpectralField(grid, grid.mean_zero(rho.coefficients))
    phi = poisson_solve(rho)
    lap = SpectralField(grid, grid.laplacian(phi.coefficients)).physical()
    r = rho.physical()
    assert np.max(np.abs(lap - r)) <= 1e-10 * np.max(np.abs(r))


def _norm(pair):
    return np.sqrt(pair[0].l2() ** 2 + pair[1].l2() ** 2)


def test_leray_gradient_and_perp(grid, rng):
    psi = random_field(grid, rng).coefficients
    grad = [SpectralField(grid, c) for c in grid.grad(psi)]
    rot, pot = leray_split(grad)
    assert _norm(rot) <= 1e-12 * _norm(grad)
    perp = [SpectralField(grid, -1j * grid.k2 * psi), SpectralField(grid, 1j * grid.k1 * psi)]
    rot, pot = leray_split(perp)
    assert _norm(pot) <= 1e-12 * _norm(perp)


def test_leray_idempotent(grid, rng):
    u = [random_field(grid, rng), random_field(grid, rng)]
    rot, _ = leray_split(u)
    rot2, _ = leray_split(rot)
    assert np.sqrt(sum((a - b).l2() ** 2 for a, b in zip(rot, rot2))) <= 1e-12 * _norm(rot)


def test_smooth_step_limits():
    r = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    np.testing.assert_array_equal(smooth_step(r, 0.0, 1.0), [0.0, 0.0, 0.5, 1.0, 1.0])


@given(st.floats(0.0, 10.0))
def test_three_cutoffs_partition(r):
    assert abs(chi1(r) + chi2(r) + chi3(r) - 1) < 1e-15
    if r <= 0.5:
        assert chi1(r) == 1.0
    if r >= 1.0:
        assert chi1(r) == 0.0
    if r <= 2.5:
        assert chi3(r) == 0.0


def test_high_mode_at_eps_one():
    cut = CutoffFamily(1.0)
    assert cut.scale * 10 >= 2.5
    assert cut.high(10.0) == 1.0 and cut.low(10.0) == 0.0 and cut.mid(10.0) == 0.0


def test_band_split_reconstructs(grid, rng):
    f = random_field(grid, rng)
    lo, mid, hi = band_split(f, CutoffFamily(0.05))
    assert (lo + mid + hi - f).l2() <= 1e-12 * f.l2()


def test_no_low_low_to_high_interaction(rng):
    """chi^l(xi - eta) chi^l(eta) chi^h(xi) = 0 on random lattice triples."""
    for eps in (1.0, 0.1, 0.01):
        cut = CutoffFamily(eps)
        g = Grid2D(128, 64 * np.pi)
        m = rng.integers(-64, 64, size=(10_000, 2, 2))
        eta = m[:, 0] * g.dk
        xi = m[:, 1] * g.dk
        prod = (cut.low(np.linalg.norm(xi - eta, axis=-1)) * cut.low(np.linalg.norm(eta, axis=-1))
                * cut.high(np.linalg.norm(xi, axis=-1)))
        assert np.all(prod == 0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 500.0))
def test_littlewood_paley_sums_to_one(k):
    blocks = littlewood_paley_symbols(np.array([k, 500.0]))
    assert abs(sum(b[0] for b in blocks) - 1) < 1e-14

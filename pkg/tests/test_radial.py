import numpy as np
import pytest

from landau3d.equilibrium import POISSON
from landau3d.radial import (
    RadialGrid,
    e_from_modes,
    log_k_grid,
    radial_fourier,
    radial_fourier_inverse,
    radial_mass,
    radial_poisson,
)


def test_grid_validation():
    with pytest.raises(ValueError):
        RadialGrid(3, 10.0)
    with pytest.raises(ValueError):
        RadialGrid(16, -1.0)


def test_radial_poisson_zero():
    r = np.linspace(0, 10, 101)
    assert np.all(radial_poisson(np.zeros_like(r), r) == 0)


def test_radial_poisson_top_hat():
    # rho = 3 on [0,1]: e(r) = r inside, 1/r^2 outside
    r = np.linspace(0, 4, 4001)
    rho = np.where(r <= 1.0, 3.0, 0.0)
    rho[r == 1.0] = 1.5  # midpoint value at the jump node
    e = radial_poisson(rho, r)
    inside = r < 1.0
    assert np.max(np.abs(e[inside] - r[inside])) < 1e-3
    outside = r > 1.1
    assert np.max(np.abs(e[outside] - 1.0 / r[outside] ** 2)) < 1e-3


def test_radial_poisson_divergence_roundtrip():
    # (1/r^2) d(r^2 e)/dr recovers rho to O(dr^2)
    errs = []
    for n in (501, 1001):
        r = np.linspace(0, 8, n)
        rho = np.exp(-r ** 2)
        e = radial_poisson(rho, r)
        r2e = r ** 2 * e
        div = np.gradient(r2e, r) / np.where(r > 0, r, 1.0) ** 2
        mask = r > 0.2  # the r^{-2} geometric factor distorts the first cells
        errs.append(np.max(np.abs(div[mask] - rho[mask])))
    assert errs[0] / errs[1] > 3.0  # second-order convergence


def test_fourier_poisson_profile():
    # the background profile transforms to exp(-k); needs a deep box for the
    # slowly decaying tail, so this uses a bigger grid than solver defaults
    grid = RadialGrid(4000, 400.0)
    fhat = radial_fourier(POISSON.value_radial(grid.r), grid)
    # truncating the r^{-4} tail at R leaves an O(1/(k^2 R^3)) error, so the
    # very smallest DST modes are excluded
    mask = (grid.k >= 0.1) & (grid.k <= 10.0)
    assert np.max(np.abs(fhat[mask] - np.exp(-grid.k[mask]))) < 1e-5


def test_fourier_round_trip_gaussian():
    grid = RadialGrid(256, 20.0)
    f = np.exp(-grid.r ** 2)
    back = radial_fourier_inverse(radial_fourier(f, grid), grid)
    assert np.max(np.abs(back - f)) < 1e-6


def test_fourier_gaussian_closed_form():
    # exp(-r^2) transforms to pi^{3/2} exp(-k^2/4)
    grid = RadialGrid(512, 30.0)
    fhat = radial_fourier(np.exp(-grid.r ** 2), grid)
    mask = grid.k <= 8.0
    target = np.pi ** 1.5 * np.exp(-grid.k[mask] ** 2 / 4)
    assert np.max(np.abs(fhat[mask] - target)) < 1e-6


def test_fourier_small_k_equals_total_integral():
    grid = RadialGrid(512, 30.0)
    f = np.exp(-grid.r ** 2)
    fhat = radial_fourier(f, grid)
    total = radial_mass(f, grid.r)
    # fhat[0] sits at k_1 = pi/R, not 0; the offset is O(k_1^2)
    assert fhat[0] == pytest.approx(total, rel=5e-3)


def test_e_from_modes_matches_radial_poisson():
    from scipy.special import erf

    grid = RadialGrid(512, 30.0)
    r = grid.r
    rho = np.exp(-r ** 2)
    exact = np.zeros_like(r)
    exact[1:] = (np.sqrt(np.pi) * erf(r[1:]) / 4
                 - r[1:] * np.exp(-r[1:] ** 2) / 2) / r[1:] ** 2
    k = np.linspace(1e-3, 25.0, 2000)
    rho_hat = np.pi ** 1.5 * np.exp(-k ** 2 / 4)
    e_spec = e_from_modes(rho_hat, k, r)
    assert np.max(np.abs(e_spec - exact)) < 1e-6
    # the direct cumulative path carries its O(dr^2) error
    e_direct = radial_poisson(rho, r)
    assert np.max(np.abs(e_direct - exact)) < 2e-4


def test_e_from_modes_small_r_limit():
    k = np.linspace(1e-3, 25.0, 4000)
    rho_hat = np.pi ** 1.5 * np.exp(-k ** 2 / 4)
    r = np.array([1e-4, 2e-4])
    e = e_from_modes(rho_hat, k, r)
    # rho(0) = 1 for the unit Gaussian: e(r) ~ r/3
    assert np.allclose(e, r / 3.0, rtol=1e-3)


def test_shell_volumes_integrate_mass():
    grid = RadialGrid(2000, 60.0)
    m = np.sum(grid.shell_volumes * POISSON.value_radial(grid.r))
    # tail mass beyond r = 60 is ~ 4/(pi * 60)
    assert m == pytest.approx(1.0 - 4 / (np.pi * 60.0), abs=2e-3)


def test_log_k_grid():
    k = log_k_grid()
    assert k.size == 256 and k[0] == pytest.approx(1e-3) and k[-1] == pytest.approx(20.0)
    assert np.allclose(np.diff(np.log(k)), np.diff(np.log(k))[0])
    with pytest.raises(ValueError):
        log_k_grid(k_min=0.0)

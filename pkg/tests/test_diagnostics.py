import numpy as np
import pytest

from landau3d.characteristics import AnalyticRadialField, ZeroField
from landau3d.diagnostics import (
    BandFilterBank,
    bnorm,
    envelope_peaks,
    fit_decay_rate,
    fit_oscillation,
    fit_stat_osc,
    lp_filter,
    scattering_diagnostic,
)
from landau3d.radial import RadialGrid


def test_bump_plateau_and_support():
    bank = BandFilterBank()
    x = np.linspace(-1.25, 1.25, 11)
    assert np.allclose(bank.bump(x), 1.0)
    assert np.allclose(bank.bump([1.6, -1.6, 2.5]), 0.0)
    mid = bank.bump(np.linspace(1.26, 1.59, 30))
    assert np.all((mid > 0) & (mid < 1))


def test_bands_partition_unity():
    bank = BandFilterBank()
    x = np.geomspace(0.01, 100.0, 500)
    total = sum(bank.band(j, x) for j in range(-10, 12))
    assert np.max(np.abs(total - 1.0)) < 1e-10


def test_band_support():
    bank = BandFilterBank()
    j = 2
    lo, hi = bank.support(j)
    x = np.geomspace(1e-2, 1e2, 1000)
    vals = bank.band(j, x)
    assert np.all(vals[(x < lo) | (x > hi)] == 0)


def test_lp_filter_reconstruction():
    grid = RadialGrid(512, 40.0)
    f = np.exp(-grid.r ** 2) * (1 + 0.3 * np.cos(2 * grid.r))
    bank = BandFilterBank()
    lo = 4 * 2 * np.pi / grid.r_max
    hi = (np.pi / grid.dr) / 4.0
    total = np.zeros_like(f)
    for j in bank.band_range(lo, hi):
        try:
            total += lp_filter(f, j, grid, bank)
        except ValueError:
            continue
    # partition of unity minus the unresolved low/high tails
    interior = (grid.r > 2.0) & (grid.r < 30.0)
    assert np.max(np.abs(total - f)[interior]) < 1e-2


def test_lp_filter_pure_mode_band_selection():
    grid = RadialGrid(512, 40.0)
    bank = BandFilterBank()
    k0 = 4.0  # sits in bands with 2^{j-1}*1.25 <= 4 <= 2^j*1.6
    f = np.zeros(grid.n_r)
    from landau3d.radial import radial_fourier_inverse
    fhat = np.exp(-0.5 * (grid.k - k0) ** 2 / 0.01)
    f = radial_fourier_inverse(fhat, grid)
    active = []
    for j in bank.band_range(0.5, 30.0):
        try:
            out = lp_filter(f, j, grid, bank)
        except ValueError:
            continue
        if np.max(np.abs(out)) > 1e-6 * np.max(np.abs(f)):
            active.append(j)
    for j in active:
        lo, hi = bank.support(j)
        assert lo <= k0 * 1.1 and hi >= k0 * 0.9


def test_lp_filter_out_of_range_band():
    grid = RadialGrid(128, 20.0)
    with pytest.raises(ValueError):
        lp_filter(np.zeros(grid.n_r), 12, grid)
    with pytest.raises(ValueError):
        lp_filter(np.zeros(grid.n_r), -8, grid)


def test_lp_filter_near_orthogonality():
    grid = RadialGrid(512, 40.0)
    f = np.exp(-((grid.r - 5.0) ** 2))
    a = lp_filter(lp_filter(f, 1, grid), 3, grid)
    scale = np.max(np.abs(lp_filter(f, 1, grid))) + 1e-300
    assert np.max(np.abs(a)) / scale < 1e-8


def test_bnorm_zero_and_homogeneity():
    grid = RadialGrid(256, 40.0)
    z = bnorm(np.zeros(grid.n_r), 3.0, grid)
    assert z.b0 == 0 and z.stat == 0 and z.osc == 0
    rho = np.exp(-grid.r ** 2)
    one = bnorm(rho, 3.0, grid)
    two = bnorm(2 * rho, 3.0, grid)
    assert two.b0 == pytest.approx(2 * one.b0, rel=1e-12)
    assert two.stat == pytest.approx(2 * one.stat, rel=1e-12)
    assert two.osc == pytest.approx(2 * one.osc, rel=1e-12)


def test_fit_decay_exact_power_law():
    t = np.linspace(5, 100, 2000)
    fit = fit_decay_rate(t, t ** -2.0, method="all-samples")
    assert fit.slope == pytest.approx(-2.0, abs=1e-6)
    assert not fit.rejected


def test_fit_decay_oscillating_envelope():
    t = np.linspace(5, 120, 12000)
    fit = fit_decay_rate(t, t ** -2.0 * np.abs(np.cos(t)))
    assert fit.slope == pytest.approx(-2.0, abs=0.02)
    assert not fit.rejected


def test_fit_decay_flags_exponential():
    t = np.linspace(5, 60, 4000)
    fit = fit_decay_rate(t, np.exp(-t), method="all-samples")
    assert fit.rejected


def test_fit_decay_needs_points():
    t = np.linspace(10, 20, 50)
    with pytest.raises(ValueError):
        fit_decay_rate(t, t ** -2.0)  # too few peaks in a monotone series


def test_fit_oscillation():
    t = np.arange(0, 100, 0.02)
    freq, err = fit_oscillation(t, np.cos(t))
    assert freq == pytest.approx(1.0, abs=1e-3)
    freq, err = fit_oscillation(t, np.exp(-t / 50) * np.cos(t))
    assert freq == pytest.approx(1.0, abs=2e-3)
    freq, err = fit_oscillation(t, np.cos(1.1 * t))
    assert freq == pytest.approx(1.1, abs=2e-3)
    with pytest.raises(ValueError):
        fit_oscillation(t[:100], np.cos(t[:100]))


def test_fit_stat_osc_exact_model():
    t = np.arange(0, 40 * np.pi, 0.05)
    c0, c1 = 0.7, 0.4 - 0.9j
    series = c0 + np.real(c1 * np.exp(-1j * t))
    centers, c0s, c1s, resid = fit_stat_osc(t, series)
    assert np.max(np.abs(c0s - c0)) < 1e-10
    assert np.max(np.abs(c1s - c1)) < 1e-10
    assert np.max(resid) < 1e-10


def test_fit_stat_osc_tracks_damped_carrier():
    k = 0.05
    t = np.arange(0, 80.0, 0.05)
    series = np.exp(-t * k) * np.cos(t)  # = Re(e^{-it}) e^{-tk}
    centers, c0s, c1s, resid = fit_stat_osc(t, series)
    assert np.max(np.abs(c0s)) < 0.02
    target = np.exp(-centers * k)
    assert np.max(np.abs(np.abs(c1s[0]) - target)) < 0.05


def test_fit_stat_osc_noise_perturbation():
    rng = np.random.default_rng(2)
    t = np.arange(0, 60.0, 0.05)
    base = 0.5 + np.real((0.3 + 0.2j) * np.exp(-1j * t))
    eta = 1e-3
    noisy = base + eta * rng.standard_normal(t.size)
    _, c0s, c1s, _ = fit_stat_osc(t, noisy)
    assert np.max(np.abs(c0s - 0.5)) < 10 * eta
    assert np.max(np.abs(c1s - (0.3 + 0.2j))) < 10 * eta


def test_fit_stat_osc_rejects_short_window():
    t = np.arange(0, 5.0, 0.05)
    with pytest.raises(ValueError):
        fit_stat_osc(t, np.cos(t))


def test_scattering_zero_field():
    seeds = (np.array([[1.0, 0.0, 0.0]]), np.array([[0.5, 0.2, 0.0]]))
    out = scattering_diagnostic(ZeroField(), seeds, [5.0, 10.0, 20.0])
    assert np.all(out["delta"] < 1e-12)  # roundoff from the large anchors


def test_scattering_manufactured_decay_slope():
    # e(r, t) = eps * g(r) <t>^{-2} with a 1/r tail in g: the deviation tail
    # integrals then shrink like 1/t, giving slope -1 for Delta(t, 2t)
    def e_func(r, t):
        return 1e-2 * (r / (1.0 + r ** 2)) / (1.0 + t ** 2)

    field = AnalyticRadialField(e_func, r_max=np.inf)
    rng = np.random.default_rng(4)
    n = 12
    x = rng.uniform(-1, 1, (n, 3))
    v = rng.uniform(-1, 1, (n, 3))
    speeds = rng.uniform(0.5, 2.0, n)
    v *= (speeds / np.linalg.norm(v, axis=1))[:, None]
    horizons = 10.0 * 2.0 ** np.arange(0, 9)
    out = scattering_diagnostic(field, (x, v), horizons, ds=0.1)
    fit = out["fit"]
    assert fit is not None
    assert fit.slope == pytest.approx(-1.0, abs=0.1)

"""Radial grids, the radial Poisson field, and radial Fourier transforms.

A radially symmetric function f(|x|) on R^3 has the transform

    fhat(k) = (4 pi / k) int_0^R f(r) r sin(kr) dr,
    f(r)    = (1 / (2 pi^2 r)) int_0^K fhat(k) k sin(kr) dk,

realized discretely with the type-I discrete sine transform on the interior
points of a uniform [0, R_max] grid.  With k_n = n pi / R_max the pair is an
exact round trip.

The electric field of a radial density is e(r) = r^{-2} int_0^r rho(s) s^2 ds
(the radial component of grad Delta^{-1} rho); e_from_modes evaluates the
same field directly from density modes on an arbitrary k-grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.fft import dst
from scipy.special import spherical_jn


@dataclass(frozen=True)
class RadialGrid:
    """Uniform grid on [0, R_max] with n_r points (r_0 = 0, r_{n-1} = R_max)."""

    n_r: int
    r_max: float

    def __post_init__(self):
        if self.n_r < 4:
            raise ValueError("n_r must be >= 4")
        if self.r_max <= 0:
            raise ValueError("r_max must be > 0")

    @cached_property
    def r(self):
        return np.linspace(0.0, self.r_max, self.n_r)

    @property
    def dr(self):
        return self.r_max / (self.n_r - 1)

    @cached_property
    def k(self):
        """DST-I wavenumbers k_n = n pi / R_max for the interior modes."""
        n = np.arange(1, self.n_r - 1)
        return n * np.pi / self.r_max

    @cached_property
    def shell_volumes(self):
        """Trapezoid weights of 4 pi r^2 dr (integrates radial profiles)."""
        w = np.full(self.n_r, self.dr)
        w[0] = w[-1] = 0.5 * self.dr
        return 4 * np.pi * self.r ** 2 * w


def radial_poisson(rho, r):
    """Field e(r) = r^{-2} int_0^r rho(s) s^2 ds of a radial density.

    The moment integral treats rho as piecewise linear and integrates
    s^2 rho(s) exactly per cell; a plain trapezoid of rho r^2 loses an O(dr)
    chunk in the first cells where the s^2 weight is strongly curved.
    """
    rho = np.asarray(rho, dtype=float)
    r = np.asarray(r, dtype=float)
    r0, r1 = r[:-1], r[1:]
    slope = np.diff(rho) / np.diff(r)
    const = rho[:-1] - slope * r0
    cell = const * (r1 ** 3 - r0 ** 3) / 3.0 + slope * (r1 ** 4 - r0 ** 4) / 4.0
    integral = np.concatenate([[0.0], np.cumsum(cell)])
    e = np.zeros_like(integral)
    e[1:] = integral[1:] / r[1:] ** 2
    return e


def radial_mass(rho, r):
    """Total integral 4 pi int rho r^2 dr."""
    return 4 * np.pi * np.trapezoid(np.asarray(rho) * np.asarray(r) ** 2, r)


def radial_fourier(f, grid: RadialGrid):
    """Forward radial transform of samples ``f`` on ``grid``.

    Returns fhat on grid.k.  The profile should have decayed by R_max; the
    endpoint samples do not enter the sine series.
    """
    f = np.asarray(f)
    if f.shape[-1] != grid.n_r:
        raise ValueError("f must be sampled on the full radial grid")
    interior = f[..., 1:-1] * grid.r[1:-1]
    # trapezoid over [0, R]: interior sum only (the integrand r f sin(kr)
    # vanishes at both endpoints); DST-I carries a factor 2
    coeffs = dst(interior, type=1, axis=-1) * (grid.dr / 2.0)
    return 4 * np.pi * coeffs / grid.k


def radial_fourier_inverse(fhat, grid: RadialGrid):
    """Inverse of radial_fourier; returns samples on the full grid.

    Interior points invert the DST exactly; r = 0 uses the limit
    f(0) = (2 pi^2)^{-1} int fhat k^2 dk and r = R_max is set to 0.
    """
    fhat = np.asarray(fhat)
    if fhat.shape[-1] != grid.n_r - 2:
        raise ValueError("fhat must be sampled on grid.k")
    dk = np.pi / grid.r_max
    coeffs = dst(fhat * grid.k, type=1, axis=-1) * (dk / 2.0)
    f = np.zeros(fhat.shape[:-1] + (grid.n_r,), dtype=fhat.dtype)
    f[..., 1:-1] = coeffs / (2 * np.pi ** 2 * grid.r[1:-1])
    # r -> 0 limit of the sine series (plain sum, consistent with the DST)
    f[..., 0] = np.sum(fhat * grid.k ** 2, axis=-1) * dk / (2 * np.pi ** 2)
    return f


def e_from_modes(rho_hat, k, r):
    """Radial field e(r) from density modes rho_hat(k) on any k-grid.

    e(r) = (2 pi^2)^{-1} int_0^inf rho_hat(k) k j_1(kr) dk with j_1 the
    spherical Bessel function; the small-r limit is rho(0) r / 3.
    Integration is trapezoid on the supplied (possibly log-spaced) k-grid.
    """
    k = np.asarray(k, dtype=float)
    r = np.asarray(r, dtype=float)
    rho_hat = np.asarray(rho_hat)
    kernel = k[None, :] * spherical_jn(1, np.outer(r, k))
    return np.trapezoid(kernel * rho_hat[None, :], k, axis=1) / (2 * np.pi ** 2)


def log_k_grid(k_min=1e-3, k_max=20.0, n=256):
    """Logarithmic mode grid; the low modes carry the slow field tail."""
    if not (0 < k_min < k_max):
        raise ValueError("need 0 < k_min < k_max")
    return np.geomspace(k_min, k_max, n)

"""Landau damping toolkit for the 3D Vlasov-Poisson system.

The package works in nondimensionalized variables (time in units of the
inverse plasma frequency, velocities in thermal units).  The Fourier
convention is fixed project-wide as

    fhat(xi) = int f(x) exp(-i x.xi) dx,

so the background velocity profile M0(v) = 1 / (pi^2 (1 + |v|^2)^2) has the
closed-form transform M0hat(xi) = exp(-|xi|).  The inverse transform carries
the factor (2 pi)^{-3}.
"""

SCHEMA_VERSION = 1

__version__ = "0.1.0"

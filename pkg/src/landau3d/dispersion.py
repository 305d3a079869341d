"""Dispersion function K(k, lambda), Penrose factor 1 + K, and the resolvent kernel.

For the Poisson equilibrium everything is closed-form:

    K(k, lambda)      = 1 / (k + i lambda)^2
    1 + K(k, lambda)  = (k + i(lambda - 1)) (k + i(lambda + 1)) / (k + i lambda)^2
    G(k, tau)         = delta_0(tau) - exp(-tau k) sin(tau) 1_{tau > 0}

The Landau poles are the zeros lambda = +-1 + i k of the numerator.  The
Laplace convention is F(lambda) = int_0^inf g(t) exp(-i lambda t) dt, which
converges for Im(lambda) below the exponential decay rate of the integrand;
the closed forms extend analytically up to the pole at lambda = i k.
k = 0 is rejected everywhere: the Penrose lower bound degenerates there
(1 + K -> 1 - lambda^{-2}, vanishing as lambda -> +-1).
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss

from .equilibrium import POISSON

ROOT_RESIDUAL_TOL = 1e-10


class DispersionDomainError(ValueError):
    """lambda outside the convergence domain of the Laplace integral."""


class RootConvergenceError(RuntimeError):
    """Landau-pole search failed; carries the last iterate and residual."""

    def __init__(self, message, last_iterate, residual):
        super().__init__(f"{message}: last iterate {last_iterate}, residual {residual:.3e}")
        self.last_iterate = last_iterate
        self.residual = residual


def _check_k(k):
    if not k > 0:
        raise DispersionDomainError("k must be > 0 (k = 0 is the degenerate Penrose point)")


def _check_domain(k, lam, equilibrium):
    # The Poisson closed form is the analytic continuation of the Laplace
    # integral to the whole plane minus the pole at lam = i k.  The numeric
    # path is limited to the convergence strip, enforced inside
    # _K_quadrature from the estimated kernel decay rate.
    if equilibrium.is_poisson and abs(k + 1j * lam) < 1e-12:
        raise DispersionDomainError("lambda = ik is the pole of the dispersion function")


def eval_K(k, lam, equilibrium=POISSON, tol=1e-9):
    """Dispersion function K(k, lambda) = int_0^inf r M0hat(rk) e^{-i lam r} dr."""
    _check_k(k)
    lam = complex(lam)
    _check_domain(k, lam, equilibrium)
    if equilibrium.is_poisson:
        return 1.0 / (k + 1j * lam) ** 2
    return _K_quadrature(k, lam, equilibrium, tol)


def _K_quadrature(k, lam, equilibrium, tol):
    """Composite Gauss-Legendre on dyadic panels of [0, R].

    R is chosen from the decay envelope of r M0hat(rk) e^{Im(lam) r}; the
    truncated tail is below ``tol``.
    """
    decay = k  # M0hat(q) tail is at worst ~exp(-c q); probe adjusts below
    q = np.array([4.0, 8.0])
    vals = equilibrium.fourier(q * max(k, 1e-3))
    if np.all(vals > 0):
        est = -np.log(vals[1] / vals[0]) / (4.0 * max(k, 1e-3))
        if np.isfinite(est) and est > 0:
            decay = est * k
    # |e^{-i lam r}| = e^{Im(lam) r}: negative Im(lam) adds decay
    rate = decay - np.imag(lam)
    if rate <= 0:
        raise DispersionDomainError("integrand does not decay for this lambda")
    R = max(8.0 / rate, 4.0)
    while R * np.exp(-rate * R) > tol * rate and R < 1e6:
        R *= 1.5

    # dyadic panels refine towards 0 where r M0hat(rk) peaks
    edges = [R]
    while edges[-1] > R * 2.0 ** -14:
        edges.append(edges[-1] / 2.0)
    edges.append(0.0)
    edges = edges[::-1]

    total = 0.0 + 0.0j
    for a, b in zip(edges[:-1], edges[1:]):
        width = b - a
        # resolve the e^{-i Re(lam) r} phase across the panel
        n = int(min(64, max(24, 8 + 2 * abs(np.real(lam)) * width)))
        x, w = leggauss(n)
        r = 0.5 * (a + b) + 0.5 * width * x
        f = r * equilibrium.fourier(r * k) * np.exp(-1j * lam * r)
        total += 0.5 * width * np.sum(w * f)
    return total


def eval_penrose(k, lam, equilibrium=POISSON, tol=1e-9):
    """Penrose factor 1 + K(k, lambda)."""
    _check_k(k)
    lam = complex(lam)
    _check_domain(k, lam, equilibrium)
    if equilibrium.is_poisson:
        return ((k + 1j * (lam - 1.0)) * (k + 1j * (lam + 1.0))) / (k + 1j * lam) ** 2
    return 1.0 + _K_quadrature(k, lam, equilibrium, tol)


def penrose_small_k_limit(lam):
    """The k -> 0 limit 1 - lambda^{-2} of the Penrose factor (Im(lam) < 0)."""
    lam = complex(lam)
    return 1.0 - lam ** -2


def landau_roots(k, equilibrium=POISSON, tol=ROOT_RESIDUAL_TOL, max_iter=60):
    """The pair of Landau poles (zeros of 1 + K) for mode magnitude k.

    Poisson kind: exactly (+1 + ik, -1 + ik).  Custom kinds run a damped
    complex Newton iteration seeded at +-1 + ik; non-convergence raises
    RootConvergenceError with the last iterate and residual.
    """
    _check_k(k)
    if equilibrium.is_poisson:
        return (1.0 + 1j * k, -1.0 + 1j * k)
    roots = []
    for seed in (1.0 + 1j * k, -1.0 + 1j * k):
        roots.append(_newton_root(k, seed, equilibrium, tol, max_iter))
    return tuple(roots)


def _newton_root(k, seed, equilibrium, tol, max_iter):
    lam = seed
    h = 1e-6
    res = abs(eval_penrose(k, lam, equilibrium))
    for _ in range(max_iter):
        if res < tol:
            return lam
        f = eval_penrose(k, lam, equilibrium)
        df = (eval_penrose(k, lam + h, equilibrium)
              - eval_penrose(k, lam - h, equilibrium)) / (2 * h)
        step = f / df
        # damp oversized steps; the factorization has nearby poles
        if abs(step) > 0.5:
            step *= 0.5 / abs(step)
        lam = lam - step
        res = abs(eval_penrose(k, lam, equilibrium))
    if res < tol:
        return lam
    raise RootConvergenceError("Landau pole search did not converge", lam, res)


def resolvent_kernel_G(k, tau):
    """Smooth part of the resolvent kernel G(k, tau) = -exp(-tau k) sin(tau).

    The unit impulse at tau = 0 is structural metadata (delta weight 1) and
    not part of the returned array.
    """
    _check_k(k)
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be positive")
    return -np.exp(-tau * k) * np.sin(tau)

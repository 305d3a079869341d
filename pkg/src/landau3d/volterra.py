"""Per-mode forced Volterra equation and its explicit resolvent inverse.

Each spatial frequency magnitude k carries the scalar equation

    rho(t) + int_0^t (t - s) M0hat((t - s) k) rho(s) ds = H(t),

solved two independent ways: product-trapezoid marching (solve_volterra_march)
and the explicit resolvent formula

    rho(t) = H(t) - int_0^t H(s) exp(-(t - s) k) sin(t - s) ds

(apply_resolvent).  The two act as oracles for each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .equilibrium import POISSON


@dataclass(frozen=True)
class ModeSeries:
    """A complex time series attached to one spatial frequency magnitude k.

    ``times`` must be a uniform grid starting at 0; ``values`` must be finite.
    """

    k: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=complex)
        if self.k <= 0:
            raise ValueError("mode magnitude k must be > 0")
        if times.ndim != 1 or times.size < 2:
            raise ValueError("times must be a 1-d grid with at least 2 points")
        dt = np.diff(times)
        if np.any(dt <= 0):
            raise ValueError("times must be strictly increasing")
        if not np.allclose(dt, dt[0], rtol=1e-10, atol=1e-12):
            raise ValueError("times must be uniformly spaced")
        if values.shape != times.shape:
            raise ValueError("values and times must have the same shape")
        if not np.all(np.isfinite(values.view(float))):
            raise ValueError("values must be finite")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dt(self):
        return self.times[1] - self.times[0]

    def with_values(self, values):
        return ModeSeries(self.k, self.times, values)


def solve_volterra_march(forcing: ModeSeries, equilibrium=POISSON) -> ModeSeries:
    """March the forced Volterra equation with the product-trapezoid rule.

    The kernel (t - s) M0hat((t - s) k) vanishes at s = t, so the scheme is
    explicit.  Local error O(dt^3), global O(dt^2).  For the Poisson kernel
    (t - s) exp(-(t - s) k) the history sum is carried by an exponential
    recursion, making the march O(N) instead of O(N^2).
    """
    if equilibrium.is_poisson:
        return _march_poisson(forcing)
    return _march_general(forcing, equilibrium)


def _march_poisson(forcing: ModeSeries) -> ModeSeries:
    k = forcing.k
    h = forcing.values
    t = forcing.times
    dt = forcing.dt
    n_steps = t.size
    d = np.exp(-k * dt)

    rho = np.empty(n_steps, dtype=complex)
    rho[0] = h[0]
    # trapezoid sum S_n = dt * [ sum_{j=0}^{n-1} (t_n - t_j) e^{-(t_n-t_j)k} rho_j
    #                            - (1/2) t_n e^{-t_n k} rho_0 ]
    # carried by P_n = sum_j e^{(t_j - t_n) k} rho_j via
    # Q_n = sum_{j<n} (t_n - t_j) e^{-(t_n - t_j) k} rho_j = d (Q_{n-1} + dt P_{n-1}).
    P = rho[0]
    Q = 0.0 + 0.0j
    for n in range(1, n_steps):
        Q = d * (Q + dt * P)
        S = dt * (Q - 0.5 * t[n] * np.exp(-k * t[n]) * rho[0])
        rho[n] = h[n] - S
        P = d * P + rho[n]
    return forcing.with_values(rho)


def _march_general(forcing: ModeSeries, equilibrium) -> ModeSeries:
    k = forcing.k
    h = forcing.values
    t = forcing.times
    dt = forcing.dt
    n_steps = t.size
    # kernel values K_m = (m dt) M0hat(m dt k), m = 0..N
    tau = t - t[0]
    kern = tau * equilibrium.fourier(tau * k)

    rho = np.empty(n_steps, dtype=complex)
    rho[0] = h[0]
    for n in range(1, n_steps):
        # trapezoid over [0, t_n]; the j = n term vanishes (kern[0] = 0)
        w = kern[n:0:-1]  # kern[n - j] for j = 0..n-1
        S = dt * (np.dot(w, rho[:n]) - 0.5 * kern[n] * rho[0])
        rho[n] = h[n] - S
    return forcing.with_values(rho)


def apply_resolvent(forcing: ModeSeries) -> ModeSeries:
    """Invert the Volterra operator with the explicit kernel.

    rho(t_n) = H(t_n) + dt * trapezoid_j G_tail(t_n - t_j) H(t_j), with
    G_tail(tau) = -exp(-tau k) sin tau.  The convolution is evaluated with an
    FFT; the trapezoid end-correction only needs the j = 0 term because the
    tail kernel vanishes at tau = 0.
    """
    k = forcing.k
    h = forcing.values
    tau = forcing.times - forcing.times[0]
    dt = forcing.dt
    g = -np.exp(-tau * k) * np.sin(tau)
    conv = fftconvolve(g, h)[: h.size]
    integral = dt * (conv - 0.5 * g * h[0])
    return forcing.with_values(h + integral)


def solve_modes(forcings, method=apply_resolvent):
    """Apply a per-mode solver across an iterable of ModeSeries."""
    return [method(f) for f in forcings]


def kernel_convolve_table(rho_hat, kern, dt):
    """Product-trapezoid C(t_n) = int_0^{t_n} K(t_n - s) rho(s) ds per mode.

    ``kern`` holds K sampled on the same uniform time grid, shape
    (n_k, n_t); K(0) must vanish (true for the t M0hat(t k) family).
    Batched FFT convolution keeps the cost at O(n_k n_t log n_t).
    """
    rho_hat = np.asarray(rho_hat)
    kern = np.asarray(kern)
    if kern.shape != rho_hat.shape:
        raise ValueError("kern and rho_hat must share shape (n_k, n_t)")
    conv = fftconvolve(kern, rho_hat, axes=1)[:, : rho_hat.shape[1]]
    return dt * (conv - 0.5 * kern * rho_hat[:, :1])


def solve_volterra_table(h, kern, dt):
    """March rho + int K(t-s) rho ds = H for a sampled kernel, all modes.

    Same product-trapezoid weights as kernel_convolve_table, so the pair
    are exact inverses on the grid.  Explicit because K(0) = 0.
    """
    h = np.asarray(h)
    kern = np.asarray(kern)
    if kern.shape != h.shape:
        raise ValueError("kern and h must share shape (n_k, n_t)")
    n_t = h.shape[1]
    rho = np.empty_like(h)
    rho[:, 0] = h[:, 0]
    for n in range(1, n_t):
        s = np.einsum("km,km->k", kern[:, n:0:-1], rho[:, :n])
        rho[:, n] = h[:, n] - dt * (s - 0.5 * kern[:, n] * rho[:, 0])
    return rho


def kernel_convolve(rho_hat, k, dt):
    """C(k, t_n) = int_0^{t_n} (t_n - s) exp(-(t_n - s) k) rho_hat(k, s) ds.

    Vectorized over modes: rho_hat has shape (n_k, n_t), k shape (n_k,).
    Same product-trapezoid weights and exponential recursion as the
    Poisson marching solver, so marched solutions satisfy
    rho + C(rho) = H to machine precision.
    """
    rho_hat = np.asarray(rho_hat)
    k = np.asarray(k, dtype=float)[:, None]
    n_t = rho_hat.shape[1]
    d = np.exp(-k[:, 0] * dt)
    out = np.zeros_like(rho_hat)
    P = rho_hat[:, 0].copy()
    Q = np.zeros(rho_hat.shape[0], dtype=rho_hat.dtype)
    for n in range(1, n_t):
        Q = d * (Q + dt * P)
        t_n = n * dt
        out[:, n] = dt * (Q - 0.5 * t_n * np.exp(-k[:, 0] * t_n) * rho_hat[:, 0])
        P = d * P + rho_hat[:, n]
    return out

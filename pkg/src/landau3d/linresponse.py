"""Linearized dynamics around the background: forcing, density, field.

For separable initial data f0(x, v) = eps * a(|x|) b(v) the free-streaming
forcing of mode magnitude k is

    H(k, t) = eps * ahat(k) * bhat(t k)

(bhat the radial velocity transform); the linearized density then solves the
per-mode Volterra equation (module volterra).  The same forcing is also
computable by velocity quadrature, which is what the static/oscillatory
representation II uses nodewise through the operator D = k - i v.xi.

Two decompositions rho = R + Re(e^{-it} T) are provided:

    I:  R = H(t),  T = -i int_0^t e^{is} e^{-(t-s)k} H(s) ds
    II: R = int [D^2/(1+D^2)] f0hat e^{-it v.xi} dv,
        T = e^{-tk} int (1 - iD)^{-1} f0hat dv

(representation II for time-independent data and away from the resonance
|v.xi| = 1 only).  For real isotropic data the per-mode reconstruction with
the real part is exact because the quadrature is symmetric in the angle
cosine.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve

from .equilibrium import POISSON, Equilibrium
from .radial import e_from_modes, log_k_grid
from .volterra import ModeSeries, apply_resolvent


class ResonanceGuardError(ValueError):
    """Quadrature nodes reach |v.xi| > 1/2 where representation II degrades."""


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InitialDatumSpec:
    """Separable radial initial datum f0 = eps * a(|x|) b(v).

    ``a_hat`` is the radial transform of the spatial profile; ``b_profile``
    the radial velocity profile with transform ``b_hat``; ``v_sup`` bounds
    the effective velocity support used by quadrature guards.
    """

    eps: float
    a_hat: Callable
    b_profile: Callable
    b_hat: Callable
    a_profile: Callable | None = None
    v_sup: float = 8.0
    label: str = "custom"

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("amplitude eps must be >= 0")

    def f0(self, x, v):
        """Pointwise values (x, v vectors of shape (..., 3))."""
        if self.a_profile is None:
            raise ValueError("datum has no stored spatial profile")
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        s = np.linalg.norm(np.asarray(v, dtype=float), axis=-1)
        return self.eps * self.a_profile(r) * self.b_profile(s)


def _c2_cutoff(s, inner, outer):
    """Even C^2 window: 1 for |s| <= inner, 0 for |s| >= outer."""
    y = np.clip((np.abs(s) - inner) / (outer - inner), 0.0, 1.0)
    return 1.0 - y ** 3 * (10.0 - 15.0 * y + 6.0 * y ** 2)


def make_datum(eps=1e-3, spatial="gaussian", width=1.0, velocity="background"):
    """Factory for the datum families used throughout the test problems.

    spatial: "gaussian" -> a(r) = exp(-(r/width)^2); "neutral-gaussian" ->
    (1 - 2r^2/(3 width^2)) exp(-(r/width)^2), whose net charge vanishes
    (ahat(0) = 0).  A neutral datum has no monopole far field, so its
    in-box perturbation mass is conserved instead of sloshing at the
    plasma frequency the way a charged datum's does.
    velocity: "background" (b = M0, bhat = e^{-eta}), "gaussian"
    (unit-covariance), "compact" (b = (1 - |v|^2/4)^3 on |v| <= 2, numeric
    transform), "cutoff-background" (M0 times a C^2 window vanishing by
    |v| = 7.5, numeric transform).
    """
    w = float(width)
    if spatial == "gaussian":
        a_profile = lambda r: np.exp(-(np.asarray(r, dtype=float) / w) ** 2)
        a_hat = lambda k: np.pi ** 1.5 * w ** 3 * np.exp(
            -(np.asarray(k, dtype=float) * w) ** 2 / 4)
    elif spatial == "neutral-gaussian":
        def a_profile(r):
            r = np.asarray(r, dtype=float)
            return (1.0 - 2.0 * r ** 2 / (3.0 * w ** 2)) * np.exp(-(r / w) ** 2)

        def a_hat(k):
            k = np.asarray(k, dtype=float)
            return (np.pi ** 1.5 * w ** 3 * (w * k) ** 2 / 6.0
                    * np.exp(-(k * w) ** 2 / 4))
    else:
        raise ValueError(f"unknown spatial profile {spatial!r}")

    if velocity == "background":
        b_profile = POISSON.value_radial
        b_hat = POISSON.fourier
        v_sup = 8.0
    elif velocity == "gaussian":
        gauss = Equilibrium(kind="custom",
                            profile=lambda s: (2 * np.pi) ** -1.5
                            * np.exp(-np.asarray(s, dtype=float) ** 2 / 2),
                            r_cut=12.0)
        b_profile = gauss.profile
        b_hat = lambda eta: np.exp(-np.asarray(eta, dtype=float) ** 2 / 2)
        v_sup = 6.0
    elif velocity == "compact":
        def prof(s):
            s = np.asarray(s, dtype=float)
            return np.where(s < 2.0, (1.0 - (s / 2.0) ** 2) ** 3, 0.0)
        comp = Equilibrium(kind="custom", profile=prof, r_cut=2.0)
        b_profile = prof
        b_hat = comp.fourier
        v_sup = 2.0
    elif velocity == "cutoff-background":
        def prof(s):
            return POISSON.value_radial(s) * _c2_cutoff(s, 6.0, 7.5)
        cut = Equilibrium(kind="custom", profile=prof, r_cut=7.5)
        b_profile = prof
        b_hat = cut.fourier
        v_sup = 7.5
    else:
        raise ValueError(f"unknown velocity profile {velocity!r}")
    return InitialDatumSpec(eps=eps, a_hat=a_hat, a_profile=a_profile,
                            b_profile=b_profile, b_hat=b_hat, v_sup=v_sup,
                            label=f"{spatial}({w})*{velocity}")


# ---------------------------------------------------------------------------
# velocity quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VelocityQuadrature:
    """Tensor Gauss-Legendre nodes in (speed, angle cosine).

    The speed axis has a finite panel on [0, s_split] plus a rational-map
    tail panel (the background has fat tails: 16% of its mass sits beyond
    speed 8, so a truncated panel alone cannot integrate it to 1e-6).
    Weights integrate 2 pi s^2 ds dmu over R^3.
    """

    n_speed: int = 64
    n_angle: int = 32
    s_split: float = 8.0
    tail_fraction: float = 0.25
    tail_scale: float = 8.0

    @cached_property
    def speed_nodes(self):
        return self._speed_axis()[0]

    @cached_property
    def speed_weights(self):
        return self._speed_axis()[1]

    def _speed_axis(self):
        n_tail = int(round(self.n_speed * self.tail_fraction))
        n_main = self.n_speed - n_tail
        x, w = leggauss(n_main)
        s_main = 0.5 * self.s_split * (x + 1.0)
        w_main = 0.5 * self.s_split * w
        if n_tail == 0:
            return s_main, w_main
        # tail: s = s_split + L y / (1 - y), y in (0, 1)
        y, wy = leggauss(n_tail)
        y = 0.5 * (y + 1.0)
        wy = 0.5 * wy
        L = self.tail_scale
        s_tail = self.s_split + L * y / (1.0 - y)
        w_tail = wy * L / (1.0 - y) ** 2
        return np.concatenate([s_main, s_tail]), np.concatenate([w_main, w_tail])

    @cached_property
    def mu_nodes(self):
        return leggauss(self.n_angle)[0]

    @cached_property
    def mu_weights(self):
        return leggauss(self.n_angle)[1]

    def integrate_isotropic(self, profile):
        """4 pi int profile(s) s^2 ds on the quadrature's speed axis."""
        s, w = self.speed_nodes, self.speed_weights
        return 4 * np.pi * np.sum(w * profile(s) * s ** 2)

    def phase_transform(self, profile, kt):
        """int profile(|v|) exp(-i v.xi) dv at |xi| = kt (vectorized in kt).

        This is the angle-resolved path the representation-II sums use; it
        equals the radial transform of the profile.
        """
        kt = np.atleast_1d(np.asarray(kt, dtype=float))
        s, ws = self.speed_nodes, self.speed_weights
        mu, wm = self.mu_nodes, self.mu_weights
        phase = np.exp(-1j * kt[:, None, None] * s[None, :, None] * mu[None, None, :])
        return 2 * np.pi * np.einsum(
            "j,l,tjl->t", ws * profile(s) * s ** 2, wm, phase)

    def check_aliasing(self, kt_max):
        """Warn when the e^{-i kt s mu} phase outruns the node density."""
        # Gauss-Legendre in mu resolves ~ n_angle half-oscillations
        if kt_max * self.s_split > 2.0 * self.n_angle:
            warnings.warn(
                f"phase kt*s up to {kt_max * self.s_split:.1f} exceeds the"
                f" angular quadrature resolution (~{2 * self.n_angle})")
            return False
        return True


# ---------------------------------------------------------------------------
# forcing and linear solve
# ---------------------------------------------------------------------------

def free_streaming_forcing(f0: InitialDatumSpec, k, times,
                           quadrature: VelocityQuadrature | None = None):
    """Forcing mode H(k, t) of freely streaming initial data.

    Uses the closed separable form eps * ahat(k) * bhat(tk); with an
    explicit ``quadrature`` the velocity integral is done numerically
    instead (same result, used for cross-checks and representation II).
    """
    times = np.asarray(times, dtype=float)
    if quadrature is None:
        vals = f0.eps * f0.a_hat(k) * f0.b_hat(times * k)
    else:
        quadrature.check_aliasing(times[-1] * k)
        vals = f0.eps * f0.a_hat(k) * quadrature.phase_transform(
            f0.b_profile, times * k)
    return ModeSeries(k, times, vals)


@dataclass
class LinearRun:
    """Per-mode linear solution rho_hat(k, t) and derived field data."""

    k_grid: np.ndarray
    times: np.ndarray
    rho_hat: np.ndarray   # (n_k, n_t) complex
    datum: InitialDatumSpec

    @property
    def e_hat_mag(self):
        """|E| mode magnitudes |rho_hat| / k."""
        return np.abs(self.rho_hat) / self.k_grid[:, None]

    def field_on_grid(self, r):
        """e(r, t) reconstructed by the inverse radial transform."""
        r = np.asarray(r, dtype=float)
        out = np.empty((r.size, self.times.size))
        for i in range(self.times.size):
            out[:, i] = e_from_modes(np.real(self.rho_hat[:, i]), self.k_grid, r)
        return out

    def field_sup(self, r):
        return np.max(np.abs(self.field_on_grid(r)), axis=0)


def solve_linear(f0: InitialDatumSpec, k_grid=None, times=None):
    """Linearized density for every mode magnitude on the grid."""
    if k_grid is None:
        k_grid = log_k_grid()
    if times is None:
        times = np.arange(0.0, 40.0 + 1e-9, 0.05)
    k_grid = np.asarray(k_grid, dtype=float)
    if np.any(k_grid <= 0):
        raise ValueError("k grid must be positive")
    rho_hat = np.empty((k_grid.size, len(times)), dtype=complex)
    for i, k in enumerate(k_grid):
        forcing = free_streaming_forcing(f0, k, times)
        rho_hat[i] = apply_resolvent(forcing).values
    return LinearRun(k_grid=k_grid, times=np.asarray(times, dtype=float),
                     rho_hat=rho_hat, datum=f0)


# ---------------------------------------------------------------------------
# static / oscillatory representations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecompositionPair:
    r_part: ModeSeries
    t_part: ModeSeries
    representation: str

    def reconstruct(self):
        """R + Re(e^{-it} T) as a ModeSeries (valid for real-mode data)."""
        t = self.r_part.times
        vals = np.real(self.r_part.values) + np.real(
            np.exp(-1j * t) * self.t_part.values)
        return self.r_part.with_values(vals)


def decompose_repI(forcing: ModeSeries) -> DecompositionPair:
    """R = H; T = -i int_0^t e^{is} e^{-(t-s)k} H(s) ds (FFT convolution)."""
    k = forcing.k
    t = forcing.times
    dt = forcing.dt
    g = np.exp(-(t - t[0]) * k)
    h = np.exp(1j * t) * forcing.values
    conv = fftconvolve(g, h)[: t.size]
    integral = dt * (conv - 0.5 * (g * h[0] + g[0] * h))
    integral[0] = 0.0
    T = -1j * integral
    return DecompositionPair(r_part=forcing, t_part=forcing.with_values(T),
                             representation="I")


def decompose_repII(f0: InitialDatumSpec, k, times,
                    quadrature: VelocityQuadrature | None = None):
    """Nodewise D-operator decomposition for time-independent data.

    D = k - i v.xi per node; refuses node sets reaching |v.xi| > 1/2 where
    the factor (1 - iD) = 1 - v.xi - ik approaches 0.
    """
    quadrature = quadrature or VelocityQuadrature()
    times = np.asarray(times, dtype=float)
    s, ws = quadrature.speed_nodes, quadrature.speed_weights
    mu, wm = quadrature.mu_nodes, quadrature.mu_weights
    a = k * np.outer(s, mu)  # v.xi per node
    carrying = np.abs(f0.b_profile(s)) > 0  # nodes outside supp b are inert
    if np.max(np.abs(a[carrying])) > 0.5:
        raise ResonanceGuardError(
            f"sup |v.xi| = {np.max(np.abs(a[carrying])):.3f} > 1/2 at k = {k}")
    D = k - 1j * a
    bw = (ws * f0.b_profile(s) * s ** 2)[:, None] * wm[None, :]
    amp = f0.eps * f0.a_hat(k) * 2 * np.pi
    phase = np.exp(-1j * np.einsum("jl,t->tjl", a, times))
    R = amp * np.einsum("jl,jl,tjl->t", bw, D ** 2 / (1.0 + D ** 2), phase)
    T_coef = amp * np.sum(bw / (1.0 - 1j * D))
    T = T_coef * np.exp(-times * k)
    return DecompositionPair(r_part=ModeSeries(k, times, R),
                             t_part=ModeSeries(k, times, T),
                             representation="II")

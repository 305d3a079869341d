"""Band filters, norm proxies, rate/frequency fits, and scattering measures.

The dyadic band filters follow the usual construction: an even bump that is
1 on [-5/4, 5/4] and supported in [-8/5, 8/5] generates bands
phi_j(x) = phi(x / 2^j) - phi(x / 2^{j-1}), which telescope to a partition
of unity away from 0.

The decay fits measure power-law envelopes (log-log least squares on local
maxima); the static/oscillatory fit splits a time series into a slow part
c0(t) and a carrier amplitude c1(t) via windowed least squares against
c0 + Re(c1 e^{-it}).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .characteristics import integrate_backward
from .radial import RadialGrid, radial_fourier, radial_fourier_inverse

DELTA_LOSS = 1e-4  # small exponent loss used in the weighted norm proxies


# ---------------------------------------------------------------------------
# Littlewood-Paley bands
# ---------------------------------------------------------------------------

def _smoothstep(y):
    """Quintic C^2 step: 0 at y <= 0, 1 at y >= 1."""
    y = np.clip(y, 0.0, 1.0)
    return y ** 3 * (10.0 - 15.0 * y + 6.0 * y ** 2)


class BandFilterBank:
    """Dyadic band multipliers phi_j on a radial wavenumber axis."""

    PLATEAU = 1.25  # bump is 1 inside this radius
    SUPPORT = 1.6   # and 0 outside this one

    def bump(self, x):
        x = np.abs(np.asarray(x, dtype=float))
        return 1.0 - _smoothstep((x - self.PLATEAU) / (self.SUPPORT - self.PLATEAU))

    def band(self, j, x):
        """phi_j(x) = phi(x / 2^j) - phi(x / 2^{j-1})."""
        return self.bump(np.asarray(x) / 2.0 ** j) - self.bump(np.asarray(x) / 2.0 ** (j - 1))

    def band_low(self, j, x):
        """phi_{<=j}: everything at or below band j."""
        return self.bump(np.asarray(x) / 2.0 ** j)

    def band_range(self, k_min, k_max):
        """Indices j whose band support intersects [k_min, k_max]."""
        j_lo = int(np.floor(np.log2(k_min / self.SUPPORT)))
        j_hi = int(np.ceil(np.log2(k_max / (self.PLATEAU / 2.0))))
        return range(j_lo, j_hi + 1)

    def support(self, j):
        return (2.0 ** (j - 1) * self.PLATEAU, 2.0 ** j * self.SUPPORT)


def lp_filter(f, j, grid: RadialGrid, bank: BandFilterBank | None = None):
    """Band-j projection of radial samples: multiply phi_j on the transform."""
    bank = bank or BandFilterBank()
    lo = 4 * 2 * np.pi / grid.r_max
    hi = (np.pi / grid.dr) / 4.0  # quarter of the radial Nyquist
    s_lo, s_hi = bank.support(j)
    if s_hi < lo or s_lo > hi:
        raise ValueError(
            f"band {j} (support [{s_lo:.3g}, {s_hi:.3g}]) outside the"
            f" resolvable range [{lo:.3g}, {hi:.3g}]")
    fhat = radial_fourier(f, grid)
    return radial_fourier_inverse(fhat * bank.band(j, grid.k), grid)


# ---------------------------------------------------------------------------
# norm proxies
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NormReport:
    """Weighted band norms of one density snapshot at time t.

    b0 is sup_j { <t>^3 ||P_j rho||_inf + ||P_j rho||_1 }.  stat and osc are
    single-snapshot proxies of the weighted space norms: stat weights the
    modes by <k> and time by <t>^{1-2 delta}; osc combines <t>^{-delta} b0
    with the <t>^{1-2 delta}-weighted b0 of the spatial gradient (the time
    derivative part needs a history and is not included).
    """

    t: float
    b0: float
    stat: float
    osc: float
    per_band: dict = field(default_factory=dict)


def bnorm(rho, t, grid: RadialGrid, bank: BandFilterBank | None = None):
    bank = bank or BandFilterBank()
    lo = 4 * 2 * np.pi / grid.r_max
    hi = (np.pi / grid.dr) / 4.0
    fhat = radial_fourier(rho, grid)
    bracket = np.sqrt(1.0 + t * t)
    jt = np.sqrt(1.0 + grid.k ** 2)  # <k> weight (<grad> multiplier)
    b0 = stat_b0 = grad_b0 = 0.0
    per_band = {}
    for j in bank.band_range(lo, hi):
        s_lo, s_hi = bank.support(j)
        if s_hi < lo or s_lo > hi:
            continue
        mult = bank.band(j, grid.k)
        pj = radial_fourier_inverse(fhat * mult, grid)
        l1 = 4 * np.pi * np.trapezoid(np.abs(pj) * grid.r ** 2, grid.r)
        linf = float(np.max(np.abs(pj)))
        contrib = bracket ** 3 * linf + l1
        per_band[j] = {"l1": l1, "linf": linf}
        b0 = max(b0, contrib)
        pj_w = radial_fourier_inverse(fhat * mult * jt, grid)
        l1w = 4 * np.pi * np.trapezoid(np.abs(pj_w) * grid.r ** 2, grid.r)
        stat_b0 = max(stat_b0, bracket ** 3 * float(np.max(np.abs(pj_w))) + l1w)
        pj_g = radial_fourier_inverse(fhat * mult * grid.k, grid)
        l1g = 4 * np.pi * np.trapezoid(np.abs(pj_g) * grid.r ** 2, grid.r)
        grad_b0 = max(grad_b0, bracket ** 3 * float(np.max(np.abs(pj_g))) + l1g)
    d = DELTA_LOSS
    return NormReport(
        t=t,
        b0=b0,
        stat=bracket ** (1 - 2 * d) * stat_b0,
        osc=bracket ** (-d) * b0 + bracket ** (1 - 2 * d) * grad_b0,
        per_band=per_band,
    )


# ---------------------------------------------------------------------------
# rate and frequency fits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple
    method: str
    n_points: int
    rejected: bool = False
    note: str = ""


def _ols_loglog(x, y):
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return slope, intercept, r2


def envelope_peaks(t, values):
    """Times and heights of strict local maxima of a sampled series."""
    v = np.asarray(values, dtype=float)
    idx = np.nonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:]))[0] + 1
    return np.asarray(t)[idx], v[idx]


def fit_decay_rate(t, values, window=None, method="envelope-peaks"):
    """Power-law fit of a nonnegative decaying series.

    Extracts the envelope (local maxima) unless method="all-samples", then
    runs ordinary least squares of log(value) against log(t) on the window.
    An exponential model is fitted alongside; if it explains the data better
    (or the power law has R^2 < 0.9) the fit is flagged rejected.
    """
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (10.0, float(t[-1]))
    if method == "envelope-peaks":
        pt, pv = envelope_peaks(t, values)
    elif method == "all-samples":
        pt, pv = t, values
    else:
        raise ValueError(f"unknown method {method!r}")
    mask = (pt >= window[0]) & (pt <= window[1]) & (pv > 0)
    pt, pv = pt[mask], pv[mask]
    if pt.size < 8:
        raise ValueError(f"only {pt.size} usable points in window {window}; need >= 8")
    slope, intercept, r2_pow = _ols_loglog(pt, pv)
    # exponential alternative: log(value) linear in t
    ly = np.log(pv)
    se, ie = np.polyfit(pt, ly, 1)
    resid = ly - (se * pt + ie)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2_exp = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    rejected = (r2_pow < 0.9) or (r2_exp > r2_pow)
    note = "" if not rejected else (
        f"power-law R^2 = {r2_pow:.4f} vs exponential R^2 = {r2_exp:.4f}")
    return RateFit(slope=float(slope), intercept=float(intercept),
                   r_squared=float(r2_pow), window=tuple(window),
                   method=method, n_points=int(pt.size),
                   rejected=bool(rejected), note=note)


def fit_oscillation(t, values, min_crossings=20):
    """Carrier frequency from the mean zero-crossing spacing.

    Returns (frequency, standard_error).  Crossing times are refined by
    linear interpolation between samples of opposite sign.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    sign = np.sign(v)
    flips = np.nonzero(sign[:-1] * sign[1:] < 0)[0]
    if flips.size < min_crossings:
        raise ValueError(f"only {flips.size} zero crossings; need >= {min_crossings}")
    frac = v[flips] / (v[flips] - v[flips + 1])
    crossings = t[flips] + frac * (t[flips + 1] - t[flips])
    spacing = np.diff(crossings)
    mean = spacing.mean()
    freq = np.pi / mean
    stderr = np.pi * spacing.std(ddof=1) / (mean ** 2 * np.sqrt(spacing.size))
    return float(freq), float(stderr)


def fit_stat_osc(t, series, window_length=6 * np.pi, overlap=0.5):
    """Split series(t) into a slow part c0(t) and carrier amplitude c1(t).

    Per sliding window, least squares of the samples against
    c0 + a cos t + b sin t; c1 = a + i b so that the model reads
    c0 + Re(c1 e^{-it}).  ``series`` may be (n_t,) or (n_points, n_t).
    Returns (window_centers, c0, c1, residual) with c0/c1 shaped
    (n_points, n_windows).
    """
    t = np.asarray(t, dtype=float)
    series = np.atleast_2d(np.asarray(series, dtype=float))
    if series.shape[-1] != t.size:
        raise ValueError("series last axis must match t")
    span = t[-1] - t[0]
    if span < window_length:
        raise ValueError(f"series span {span:.3g} shorter than window {window_length:.3g}")
    step = window_length * (1.0 - overlap)
    starts = np.arange(t[0], t[-1] - window_length + 1e-9, step)
    centers, c0s, c1s, resids = [], [], [], []
    for start in starts:
        mask = (t >= start) & (t <= start + window_length)
        tw = t[mask]
        if tw.size < 8:
            continue
        A = np.column_stack([np.ones_like(tw), np.cos(tw), np.sin(tw)])
        gram = A.T @ A
        if np.linalg.cond(gram) > 1e8:
            raise ValueError("window too short: normal equations ill-conditioned")
        coef, *_ = np.linalg.lstsq(A, series[:, mask].T, rcond=None)
        fitted = A @ coef
        resid = np.max(np.abs(series[:, mask].T - fitted))
        centers.append(start + window_length / 2.0)
        c0s.append(coef[0])
        c1s.append(coef[1] + 1j * coef[2])
        resids.append(resid)
    return (np.array(centers), np.array(c0s).T, np.array(c1s).T,
            np.array(resids))


# ---------------------------------------------------------------------------
# scattering convergence
# ---------------------------------------------------------------------------

def scattering_diagnostic(field, seeds, horizons, ds=0.05, f0=None,
                          equilibrium=None):
    """Convergence of the deviations (and profile) over growing horizons.

    For each horizon t the backward flow is anchored at (x + t v, v) so that
    all horizons share the same free-streaming label (x, v).  Returns a dict
    with the per-horizon deviations at s = 0, the consecutive differences
    Delta(t, t') = sup_seeds |dY| + |dW|, and a log-log RateFit of Delta
    against the horizon when at least 8 pairs exist (None otherwise; the
    acceptance fit uses 4 doublings, below that threshold).
    """
    x, v = (np.atleast_2d(np.asarray(c, dtype=float)) for c in seeds)
    horizons = np.asarray(horizons, dtype=float)
    Y_end, W_end, profile = [], [], []
    for t in horizons:
        s_grid = np.linspace(t, 0.0, max(int(round(t / ds)), 2) + 1)
        traj = integrate_backward((x + t * v, v), t, s_grid, field)
        Y_end.append(traj.Y[:, -1])
        W_end.append(traj.W[:, -1])
        if f0 is not None and equilibrium is not None:
            # exact transport value at the anchor: f0 at the foot plus the
            # equilibrium difference accumulated along the trajectory
            val = (f0(traj.X[:, -1], traj.V[:, -1])
                   + equilibrium.value(traj.V[:, -1]) - equilibrium.value(v))
            profile.append(val)
    deltas = np.array([
        float(np.max(np.linalg.norm(Y_end[i + 1] - Y_end[i], axis=-1)
                     + np.linalg.norm(W_end[i + 1] - W_end[i], axis=-1)))
        for i in range(len(horizons) - 1)])
    profile_deltas = None
    if profile:
        profile_deltas = np.array([
            float(np.max(np.abs(profile[i + 1] - profile[i])))
            for i in range(len(horizons) - 1)])
    fit = None
    if deltas.size >= 8 and np.all(deltas > 0):
        fit = fit_decay_rate(horizons[:-1], deltas, window=(horizons[0], horizons[-2]),
                             method="all-samples")
    return {
        "horizons": horizons,
        "delta": deltas,
        "profile_delta": profile_deltas,
        "fit": fit,
        "Y_end": np.array(Y_end),
        "W_end": np.array(W_end),
    }

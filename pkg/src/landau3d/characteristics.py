"""Characteristic curves of a given electric-field history.

Backward characteristics (X, V) through phase point (x, v) at time t solve

    dX/ds = V,   dV/ds = E(X, s),   X(t) = x,  V(t) = v,

integrated here with classical RK4 on a prescribed s-grid.  The deviation
functions compare the flow against free streaming from the same anchor:

    Ytilde(s) = X(s) - (x - (t - s) v),   Wtilde(s) = V(s) - v,

which satisfy the fixed-point identities

    Wtilde(s) = -int_s^t E(x0 + tau v + Ytilde(tau), tau) dtau,
    Ytilde(s) =  int_s^t (tau - s) E(x0 + tau v + Ytilde(tau), tau) dtau,

with x0 = x - tv the free-streaming label; deviation_picard iterates these
directly as an independent oracle for the ODE integrator.

Spherically symmetric histories reduce to (r, u, l) with u the radial
velocity and l = r w the conserved angular momentum magnitude:

    dr/ds = u,   du/ds = e(r, s) + l^2 / r^3.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator


class FieldBlowupError(RuntimeError):
    """A single step changed a velocity by more than the configured bound."""


class PicardDivergenceError(RuntimeError):
    """Deviation iterates grew instead of contracting (field too large)."""


# ---------------------------------------------------------------------------
# field samplers
# ---------------------------------------------------------------------------

class AnalyticField:
    """Wraps a vector function E(x, t) (x shape (..., 3))."""

    def __init__(self, func):
        self.func = func

    def __call__(self, x, t):
        return np.asarray(self.func(np.asarray(x, dtype=float), t), dtype=float)


class ZeroField:
    def __call__(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=float))


class AnalyticRadialField:
    """Radial field magnitude from a function e(r, t); odd in r."""

    def __init__(self, func, r_max=np.inf):
        self.func = func
        self.r_max = r_max

    def radial(self, r, t):
        r = np.asarray(r, dtype=float)
        return np.sign(r) * np.asarray(self.func(np.abs(r), t), dtype=float)

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        e = self.radial(r, t)
        with np.errstate(invalid="ignore"):
            unit = np.where(r[..., None] > 0, x / np.maximum(r, 1e-300)[..., None], 0.0)
        return e[..., None] * unit


class RadialFieldSampler:
    """Bilinear sampler of a radial history e(r, t); E(x) = e(|x|) x/|x|.

    Outside the stored (r, t) box the field is zero; the first such lookup
    emits a warning so truncation effects stay visible.
    """

    def __init__(self, r, t, e_rt):
        r = np.asarray(r, dtype=float)
        t = np.asarray(t, dtype=float)
        e_rt = np.asarray(e_rt, dtype=float)
        if e_rt.shape != (r.size, t.size):
            raise ValueError("e_rt must have shape (len(r), len(t))")
        self.r_max = r[-1]
        self.t_max = t[-1]
        self._interp = RegularGridInterpolator(
            (r, t), e_rt, bounds_error=False, fill_value=0.0)
        self._warned = False

    def radial(self, r, t):
        """Radial field magnitude e(r, t) (vectorized in r and t)."""
        r = np.asarray(r, dtype=float)
        t = np.broadcast_to(np.asarray(t, dtype=float), r.shape)
        out = self._interp(np.stack([np.abs(r), t], axis=-1))
        outside = (np.abs(r) > self.r_max) | (t > self.t_max)
        if np.any(outside) and not self._warned:
            warnings.warn("field sampled outside the stored (r, t) box; using 0")
            self._warned = True
        # odd extension keeps the signed-radius line consistent
        return np.sign(r) * out

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        e = self.radial(r, np.broadcast_to(t, r.shape))
        with np.errstate(invalid="ignore"):
            unit = np.where(r[..., None] > 0, x / np.maximum(r, 1e-300)[..., None], 0.0)
        return e[..., None] * unit


# ---------------------------------------------------------------------------
# trajectory containers
# ---------------------------------------------------------------------------

@dataclass
class TrajectorySet:
    """Batched characteristic curves anchored at time ``t = s_grid[0]``.

    Full coordinates: X, V have shape (n_seeds, n_s, 3).  Reduced
    coordinates: X holds (r,) and V holds (u,) with shape (n_seeds, n_s);
    ``ell`` carries the conserved angular momenta.
    """

    s_grid: np.ndarray
    X: np.ndarray
    V: np.ndarray
    Y: np.ndarray | None = None
    W: np.ndarray | None = None
    ell: np.ndarray | None = None
    min_r: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _rk4_step(x, v, s, ds, field):
    k1x = v
    k1v = field(x, s)
    k2x = v + 0.5 * ds * k1v
    k2v = field(x + 0.5 * ds * k1x, s + 0.5 * ds)
    k3x = v + 0.5 * ds * k2v
    k3v = field(x + 0.5 * ds * k2x, s + 0.5 * ds)
    k4x = v + ds * k3v
    k4v = field(x + ds * k3x, s + ds)
    xn = x + (ds / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
    vn = v + (ds / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return xn, vn


def integrate(x, v, s_grid, field, dv_max=np.inf):
    """RK4 integration of the characteristic system along ``s_grid``.

    Anchored at s_grid[0]; the grid may run forward or backward in time.
    Seeds are batched: x, v of shape (n, 3) or a single (3,) pair.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    s_grid = np.asarray(s_grid, dtype=float)
    n, n_s = x.shape[0], s_grid.size
    X = np.empty((n, n_s, 3))
    V = np.empty((n, n_s, 3))
    X[:, 0] = x
    V[:, 0] = v
    for i in range(n_s - 1):
        ds = s_grid[i + 1] - s_grid[i]
        xn, vn = _rk4_step(X[:, i], V[:, i], s_grid[i], ds, field)
        dv = np.linalg.norm(vn - V[:, i], axis=-1)
        if np.any(dv > dv_max):
            raise FieldBlowupError(
                f"|dV| = {dv.max():.3e} exceeded bound {dv_max} at s = {s_grid[i]}")
        X[:, i + 1], V[:, i + 1] = xn, vn
    return X, V


def integrate_backward(seed, t, s_grid, field, dv_max=np.inf):
    """Backward characteristics from anchor (x, v) at time t.

    ``s_grid`` must decrease from t (toward 0).  Returns a TrajectorySet
    with the anchor-relative deviations Ytilde, Wtilde filled in.
    """
    x, v = seed
    s_grid = np.asarray(s_grid, dtype=float)
    if abs(s_grid[0] - t) > 1e-12 or np.any(np.diff(s_grid) >= 0):
        raise ValueError("s_grid must decrease starting at the anchor time t")
    X, V = integrate(x, v, s_grid, field, dv_max)
    x2 = np.atleast_2d(np.asarray(x, dtype=float))
    v2 = np.atleast_2d(np.asarray(v, dtype=float))
    free = x2[:, None, :] - (t - s_grid)[None, :, None] * v2[:, None, :]
    return TrajectorySet(s_grid=s_grid, X=X, V=V,
                         Y=X - free, W=V - v2[:, None, :])


def integrate_forward(seed, s_grid, field, dv_max=np.inf):
    """Forward integration anchored at s_grid[0] (round-trip checks)."""
    x, v = seed
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(np.diff(s_grid) <= 0):
        raise ValueError("s_grid must increase")
    X, V = integrate(x, v, s_grid, field, dv_max)
    return TrajectorySet(s_grid=s_grid, X=X, V=V)


# ---------------------------------------------------------------------------
# reduced (spherically symmetric) flow
# ---------------------------------------------------------------------------

def _reduced_rhs(r, u, ell2, s, sampler):
    with np.errstate(divide="ignore", over="ignore"):
        cent = np.where(ell2 > 0, ell2 / np.abs(r) ** 3, 0.0)
    return u, sampler.radial(r, s) + np.sign(r) * cent


def integrate_reduced(seed, t, s_grid, sampler, r_safe=None, max_halvings=12):
    """Reduced characteristics (r, u) with conserved angular momentum l.

    l > 0 seeds keep r > 0 (the centrifugal barrier repels the origin);
    l = 0 seeds run on a signed radial line with the odd extension
    e(-r) = -e(r), which removes the coordinate singularity.  Steps that
    approach the barrier are recursively halved (adaptive substepping).
    """
    r0, u0, ell = (np.atleast_1d(np.asarray(c, dtype=float)) for c in seed)
    s_grid = np.asarray(s_grid, dtype=float)
    if abs(s_grid[0] - t) > 1e-12:
        raise ValueError("s_grid must start at the anchor time t")
    n, n_s = r0.size, s_grid.size
    if r_safe is None:
        r_safe = 1e-3 * getattr(sampler, "r_max", 1.0)
    ell2 = ell ** 2
    R = np.empty((n, n_s))
    U = np.empty((n, n_s))
    R[:, 0], U[:, 0] = r0, u0
    min_r = np.abs(r0).copy()
    for i in range(n_s - 1):
        r, u = _step_reduced(R[:, i], U[:, i], ell2, s_grid[i],
                             s_grid[i + 1] - s_grid[i], sampler, r_safe,
                             max_halvings)
        R[:, i + 1], U[:, i + 1] = r, u
        min_r = np.minimum(min_r, np.abs(r))
    return TrajectorySet(s_grid=s_grid, X=R, V=U, ell=ell, min_r=min_r,
                         meta={"reduced": True})


def _step_reduced(r, u, ell2, s, ds, sampler, r_safe, max_halvings):
    # halve the step (per seed) while the motion would cross the barrier
    # region faster than the step resolves
    need = np.abs(u * ds) > 0.25 * np.maximum(np.abs(r), r_safe)
    n_sub = np.where(need, 2, 1)
    for _ in range(max_halvings):
        finer = np.abs(u) * (ds / n_sub) > 0.25 * np.maximum(np.abs(r), r_safe)
        grow = finer & (n_sub < 2 ** max_halvings)
        if not np.any(grow):
            break
        n_sub = np.where(grow, n_sub * 2, n_sub)
    out_r, out_u = r.copy(), u.copy()
    for m in np.unique(n_sub):
        sel = n_sub == m
        rr, uu = r[sel], u[sel]
        e2 = ell2[sel]
        h = ds / m
        ss = s
        for _ in range(m):
            rr, uu = _rk4_reduced(rr, uu, e2, ss, h, sampler)
            ss += h
        out_r[sel], out_u[sel] = rr, uu
    return out_r, out_u


def _rk4_reduced(r, u, ell2, s, ds, sampler):
    k1r, k1u = _reduced_rhs(r, u, ell2, s, sampler)
    k2r, k2u = _reduced_rhs(r + 0.5 * ds * k1r, u + 0.5 * ds * k1u, ell2,
                            s + 0.5 * ds, sampler)
    k3r, k3u = _reduced_rhs(r + 0.5 * ds * k2r, u + 0.5 * ds * k2u, ell2,
                            s + 0.5 * ds, sampler)
    k4r, k4u = _reduced_rhs(r + ds * k3r, u + ds * k3u, ell2, s + ds, sampler)
    rn = r + (ds / 6.0) * (k1r + 2 * k2r + 2 * k3r + k4r)
    un = u + (ds / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
    return rn, un


# ---------------------------------------------------------------------------
# deviation fixed point
# ---------------------------------------------------------------------------

def deviation_picard(seed, t, s_grid, field, tol=1e-10, max_iter=50):
    """Fixed-point iteration for the deviations (Ytilde, Wtilde).

    Starts from Ytilde = 0 and iterates the integral identities in the
    module docstring with trapezoid quadrature on ``s_grid`` (decreasing
    from t).  Divergence of the iterates raises PicardDivergenceError.
    Returns (Y, W, n_iterations) with shapes (n_seeds, n_s, 3).
    """
    x, v = (np.atleast_2d(np.asarray(c, dtype=float)) for c in seed)
    s_grid = np.asarray(s_grid, dtype=float)
    if abs(s_grid[0] - t) > 1e-12 or np.any(np.diff(s_grid) >= 0):
        raise ValueError("s_grid must decrease starting at the anchor time t")
    x0 = x - t * v  # free-streaming label
    n, n_s = x.shape[0], s_grid.size
    Y = np.zeros((n, n_s, 3))
    W = np.zeros((n, n_s, 3))
    prev_delta = np.inf
    for iteration in range(1, max_iter + 1):
        pos = x0[:, None, :] + s_grid[None, :, None] * v[:, None, :] + Y
        E = np.stack([field(pos[:, j], s_grid[j]) for j in range(n_s)], axis=1)
        W_new = -_tail_trapezoid(E, s_grid)
        # int_s^t (tau - s) E dtau = int_s^t tau E dtau - s int_s^t E dtau
        Y_new = _tail_trapezoid(s_grid[None, :, None] * E, s_grid) \
            + s_grid[None, :, None] * W_new
        delta = np.max(np.abs(Y_new - Y)) + np.max(np.abs(W_new - W))
        if delta > 10 * prev_delta + tol:
            raise PicardDivergenceError(
                f"iterate difference grew to {delta:.3e} at iteration {iteration}")
        Y, W = Y_new, W_new
        if delta < tol:
            return Y, W, iteration
        prev_delta = max(delta, tol)
    return Y, W, max_iter


def _tail_trapezoid(g, s_grid):
    """Trapezoid of g over [s_j, t] for every j (s_grid decreasing from t).

    Returns the array of int_{s_j}^{s_0} g(tau) dtau.
    """
    ds = -np.diff(s_grid)  # positive
    incr = 0.5 * (g[:, 1:] + g[:, :-1]) * ds[None, :, None]
    out = np.zeros_like(g)
    out[:, 1:] = np.cumsum(incr, axis=1)
    return out


def round_trip_error(seed, t, s_grid, field):
    """Backward-then-forward integration mismatch at the anchor."""
    traj = integrate_backward(seed, t, s_grid, field)
    back = integrate_forward((traj.X[:, -1], traj.V[:, -1]), s_grid[::-1], field)
    x, v = (np.atleast_2d(np.asarray(c, dtype=float)) for c in seed)
    return float(np.max(np.linalg.norm(back.X[:, -1] - x, axis=-1)
                        + np.linalg.norm(back.V[:, -1] - v, axis=-1)))

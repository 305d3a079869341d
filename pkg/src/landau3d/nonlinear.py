"""Spherically symmetric nonlinear solver in two cross-checking modes.

The perturbation f of the background M0 is carried along characteristics of
the self-consistent radial field e(r, t):

    f(z(t), t) = f0(z(0)) + M0(|v(0)|) - M0(|v(t)|),

the closed-form accumulation of the source -E . grad_v M0 along the
trajectory; the field is recovered from rho = int f dv through
e = r^{-2} int rho s^2 ds.  Two solvers realize this:

  Mode D (run_direct): forward characteristic quadrature.  Phase-space
  nodes carry f values and the density is deposited with linear (tent)
  shape functions in r.

  Mode P (run_picard): the density fixed point.  Given a frozen field
  iterate, the forcing

      N(r, t) = N1 + N2,
      N1 = int f0(feet) dv,
      N2 = int_0^t int [ (E . grad M0)(x - (t-s)v, s)
                        - (E . grad M0)(Z(s), s) ] dv ds,

  feeds the per-mode Volterra resolvent (the free-streaming half of N2 is
  spectral: the v-integral of e^{-i(t-s) v.xi} grad M0 dotted into the
  field modes reduces to the Volterra kernel convolution of rho_hat), and
  the resulting density produces the next field.  Both modes share the
  same phase-space discretization, so their disagreement measures
  time-stepping and fixed-point error, not quadrature noise.

Reduced coordinates: (r, u, l) with u the radial velocity and l = r w the
conserved angular momentum (w the tangential speed); the phase-space
measure is 8 pi^2 l dl dr du = 8 pi^2 r^2 w dr du dw.

Time stepping is a kick-drift-kick split.  The drift applies the exact
free-streaming map

    r' = sqrt(r^2 + 2 r u h + s^2 h^2),   u' = (r u + s^2 h) / r',

(s the conserved speed) which resolves the centrifugal bounce in closed
form and conserves |v| identically, so a zero-amplitude run produces an
exactly zero density and the carried values pick up no integrator noise.
Kicks shift u by the field impulse; both maps preserve the phase-space
measure exactly, which is what keeps the deposited mass drift at the
quadrature level instead of the time-integration level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial.legendre import leggauss

from .characteristics import FieldBlowupError, RadialFieldSampler
from .equilibrium import POISSON
from .linresponse import InitialDatumSpec, free_streaming_forcing
from .radial import RadialGrid, radial_fourier, radial_fourier_inverse, radial_poisson
from .volterra import apply_resolvent, solve_volterra_table


class PicardNonContractionError(RuntimeError):
    """Iterate distances grew: amplitude outside the perturbative regime."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log or []


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearConfig:
    """Desk-scale discretization parameters shared by both solver modes."""

    n_r: int = 96
    r_max: float = 40.0
    n_u: int = 32
    n_w: int = 16
    dt: float = 0.05
    t_max: float = 40.0
    u_max: float = 8.0
    w_max: float = 8.0
    stretch: float = 2.5
    n_rq: int = 4
    tol_picard: float = 1e-9
    n_max_picard: int = 12
    window_t: float = 5.0
    relax: float = 1.0

    def __post_init__(self):
        if min(self.n_r, self.n_u, self.n_w) < 4:
            raise ValueError("grid sizes must be >= 4")
        if self.n_rq < 1:
            raise ValueError("need at least one radial node per cell")
        if not (0 < self.dt <= 0.1):
            raise ValueError("time step must be in (0, 0.1]")
        if self.t_max <= 0 or self.r_max <= 0:
            raise ValueError("t_max and r_max must be > 0")
        if self.window_t <= 0:
            raise ValueError("window_t must be > 0")
        if not (0 < self.relax <= 1):
            raise ValueError("relax must be in (0, 1]")

    @cached_property
    def grid(self):
        return RadialGrid(self.n_r, self.r_max)

    @cached_property
    def times(self):
        n_t = int(round(self.t_max / self.dt)) + 1
        return np.arange(n_t) * self.dt


# ---------------------------------------------------------------------------
# phase-space quadrature and deposition
# ---------------------------------------------------------------------------

def _sinh_axis(n, x_lo, x_hi, stretch):
    """Gauss-Legendre nodes under x = sinh(a y)/sinh(a) scaling of [lo, hi].

    The background has poles at distance O(1) from the real velocity axis;
    plain Gauss-Legendre on a half-width-8 panel stalls near 1e-3 relative
    error, while the sinh map clusters nodes where the profile lives and
    pushes the poles away in the mapped variable (1e-9 at the same count).
    """
    y, wy = leggauss(n)
    half = 0.5 * (x_hi - x_lo)
    mid = 0.5 * (x_hi + x_lo)
    a = stretch
    x = mid + half * np.sinh(a * y) / np.sinh(a)
    w = wy * half * a * np.cosh(a * y) / np.sinh(a)
    return x, w


class PhaseQuadrature:
    """Quadrature nodes (r_i, u_a, w_b) for the reduced phase space.

    Radial positions carry n_rq Gauss-Legendre nodes per grid cell; with
    4 nodes the tent-weighted shell volumes (integrals of a linear tent
    against r^2) come out exact, which removes the O(dr^2/r^2) density
    bias a single midpoint node leaves near the axis.  The velocity plane
    uses sinh-mapped Gauss-Legendre nodes in the radial velocity u on
    [-u_max, u_max] and in the tangential speed w on (0, w_max], which
    keeps the angular momentum l = r w strictly positive.  Node weights
    discretize the full measure 8 pi^2 r^2 w dr du dw; ``vel_weights``
    alone discretize the velocity integral 2 pi w du dw at a fixed radius.
    """

    def __init__(self, config: NonlinearConfig):
        self.config = config
        dr = config.grid.dr
        y, wy = leggauss(config.n_rq)
        edges = np.arange(config.n_r) * dr
        self.r0 = (edges[:-1, None] + 0.5 * dr * (1.0 + y)[None, :]).ravel()
        self.r0_weights = np.tile(0.5 * dr * wy, config.n_r - 1)
        self.u_nodes, self.u_weights = _sinh_axis(
            config.n_u, -config.u_max, config.u_max, config.stretch)
        self.w_nodes, self.w_weights = _sinh_axis(
            config.n_w, 0.0, config.w_max, config.stretch)

        R, U, W = np.meshgrid(self.r0, self.u_nodes, self.w_nodes,
                              indexing="ij")
        self.r = R.ravel()
        self.u = U.ravel()
        self.w = W.ravel()
        self.ell = self.r * self.w
        wgt = np.einsum("i,a,b->iab", self.r0_weights,
                        self.u_weights, self.w_weights)
        self.weights = (8 * np.pi ** 2 * R ** 2 * W * wgt).ravel()

    @cached_property
    def vel_weights(self):
        """Weights of 2 pi w du dw (velocity integral at one radius)."""
        return (2 * np.pi * self.w_nodes
                * np.einsum("a,b->ab", self.u_weights, self.w_weights)).ravel()

    def background_mass(self, equilibrium=POISSON):
        """Quadrature of M0 over the truncated (r, u, w) box."""
        s = np.hypot(self.u, self.w)
        return float(np.sum(self.weights * equilibrium.value_radial(s)))

    def kernel_table(self, k, times, equilibrium=POISSON, blend_xi=None):
        """Volterra reaction kernel as seen by this velocity grid.

        Continuum form: K(tau, k) = tau M0hat(tau k) = tau exp(-tau k),
        obtained from the velocity integral of grad M0 by integration by
        parts.  Integration by parts is not available to a discrete node
        sum, so the table evaluates the gradient sum directly,

            K(tau, k) = -(1/k) sum_nodes w (dM0/du) sin(tau k u),

        which is exactly what a trajectory quadrature over the same nodes
        produces at first order in the field.  Pairing this kernel with
        node-sampled trajectory terms lets their linear parts cancel
        quadrature error included; the continuum kernel would leave a
        first-order residue from the truncated fat velocity tail.
        """
        k = np.asarray(k, dtype=float)
        times = np.asarray(times, dtype=float)
        u = np.repeat(self.u_nodes, self.w_nodes.size)
        w = np.tile(self.w_nodes, self.u_nodes.size)
        coef = self.vel_weights * equilibrium.du_radial(u, w)
        kern = np.empty((k.size, times.size))
        for i in range(k.size):
            xi = times * k[i]
            row = -(np.sin(np.outer(xi, u)) @ coef) / k[i]
            if blend_xi is not None:
                # beyond xi ~ blend_xi the node sum aliases (phases outrun
                # the node spacing); cross over to the smooth continuum
                # kernel there, where the modes carry little resolvent gain
                sig = 0.5 * (1.0 - np.tanh(xi - blend_xi))
                row = sig * row + (1.0 - sig) * times * equilibrium.fourier(xi)
            kern[i] = row
        return kern


def tent_volumes(grid: RadialGrid):
    """Exact integrals of 4 pi r^2 times each tent shape function."""
    dr = grid.dr
    v = 4 * np.pi * (dr * grid.r ** 2 + dr ** 3 / 6.0)
    v[0] = np.pi * dr ** 3 / 3.0
    R = grid.r_max
    v[-1] = 4 * np.pi * dr * (R ** 2 / 2.0 - R * dr / 3.0 + dr ** 2 / 12.0)
    return v


def deposit(positions, values, grid: RadialGrid, volumes=None):
    """Tent deposition of weighted samples onto the radial grid.

    Returns (rho, leak): the density after shell-volume normalization and
    the total weight carried by samples beyond R_max.  The tents partition
    unity on [0, R_max), so sum(rho * volumes) + leak = sum(values).
    """
    if volumes is None:
        volumes = tent_volumes(grid)
    r = np.abs(np.asarray(positions, dtype=float))
    inside = r < grid.r_max
    leak = float(np.sum(values[~inside]))
    r_in = r[inside]
    v_in = values[inside]
    pos = r_in / grid.dr
    idx = pos.astype(int)
    frac = pos - idx
    counts = (np.bincount(idx, weights=v_in * (1.0 - frac), minlength=grid.n_r)
              + np.bincount(idx + 1, weights=v_in * frac, minlength=grid.n_r))
    return counts / volumes, leak


# ---------------------------------------------------------------------------
# split-step maps
# ---------------------------------------------------------------------------

def drift_map(r, u, ell2, h):
    """Exact free-streaming map of the reduced coordinates over time h.

    Conserves the speed s^2 = u^2 + l^2/r^2 identically (the new radius
    satisfies s^2 r'^2 = (r u + s^2 h)^2 + l^2 algebraically), so the
    centrifugal bounce needs no substepping.
    """
    r2 = r * r
    s2 = u * u + ell2 / r2
    r_new = np.sqrt(r2 + 2.0 * r * u * h + s2 * h * h)
    r_new = np.maximum(r_new, 1e-300)
    u_new = (r * u + s2 * h) / r_new
    return r_new, u_new


def _field_at(e_vals, r, grid):
    return np.interp(np.abs(r), grid.r, e_vals, right=0.0) * np.sign(r)


# ---------------------------------------------------------------------------
# field history container
# ---------------------------------------------------------------------------

@dataclass
class FieldHistory:
    """Density and field on the (r, t) grid plus conservation bookkeeping.

    ``mass[n]`` is the full weighted node sum at t_n (deposited mass plus
    ``leak[n]``, the weight beyond R_max); rho_hat holds the per-mode
    densities on grid.k when available.
    """

    grid: RadialGrid
    times: np.ndarray
    rho: np.ndarray                 # (n_r, n_t)
    e: np.ndarray                   # (n_r, n_t)
    rho_hat: np.ndarray | None = None
    mass: np.ndarray | None = None
    leak: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def sampler(self):
        return RadialFieldSampler(self.grid.r, self.times, self.e)

    def boundary_peak_ratio(self):
        peak = np.max(np.abs(self.rho))
        if peak == 0:
            return 0.0
        return float(np.max(np.abs(self.rho[-1])) / peak)


# ---------------------------------------------------------------------------
# Mode D: direct forward march
# ---------------------------------------------------------------------------

class _ControlVariate:
    """Paired deposits: full values on true nodes minus background on free.

    Every node carries the constant full-distribution value
    M0(|v_0|) + f0(seed) along its true trajectory; the homogeneous
    background M0(|v_0|) is deposited separately along the exact
    free-streaming positions (where it reproduces density 1 in the
    continuum).  The difference is the perturbation density with all
    box-truncation and node-granularity artifacts cancelling to first
    order, and the combined deposited-plus-leaked mass is constant to
    rounding because both sets of carried values never change.
    """

    def __init__(self, f0, quad, grid, volumes, equilibrium):
        self.grid = grid
        self.volumes = volumes
        s0 = np.hypot(quad.u, quad.w)
        bg = equilibrium.value_radial(s0)
        pert = f0.eps * f0.a_profile(quad.r) * f0.b_profile(s0)
        self.vals_full = quad.weights * (bg + pert)
        self.vals_bg = quad.weights * bg
        self.r0 = quad.r.copy()
        self.u0 = quad.u.copy()
        self.ell2 = quad.ell ** 2
        self.s0sq = s0 ** 2

    def free_positions(self, t):
        r2 = self.r0 ** 2
        return np.sqrt(r2 + 2.0 * self.r0 * self.u0 * t + self.s0sq * t * t)

    def density(self, r_true, t):
        rho_full, leak_full = deposit(r_true, self.vals_full, self.grid,
                                      self.volumes)
        rho_bg, leak_bg = deposit(self.free_positions(t), self.vals_bg,
                                  self.grid, self.volumes)
        rho = rho_full - rho_bg
        leak = leak_full - leak_bg
        mass = float(np.sum(rho * self.volumes)) + leak
        return rho, leak, mass


def run_direct(f0: InitialDatumSpec, config: NonlinearConfig | None = None,
               equilibrium=POISSON, dv_max=0.5) -> FieldHistory:
    """Self-consistent forward characteristic march (Mode D).

    Leapfrog per step: half field impulse at t_n, exact drift, deposit
    (the density depends on positions only, since the carried values are
    the conserved full-distribution values), field solve, closing half
    impulse with the new field.  A step whose field impulse exceeds
    ``dv_max`` raises FieldBlowupError.
    """
    config = config or NonlinearConfig()
    grid, times, dt = config.grid, config.times, config.dt
    quad = PhaseQuadrature(config)
    volumes = tent_volumes(grid)
    cv = _ControlVariate(f0, quad, grid, volumes, equilibrium)

    r, u = quad.r.copy(), quad.u.copy()
    ell2 = quad.ell ** 2

    n_t = times.size
    rho = np.zeros((grid.n_r, n_t))
    e = np.zeros((grid.n_r, n_t))
    mass = np.zeros(n_t)
    leak = np.zeros(n_t)

    rho[:, 0], leak[0], mass[0] = cv.density(r, 0.0)
    e[:, 0] = radial_poisson(rho[:, 0], grid.r)

    for n in range(n_t - 1):
        e_n = e[:, n]
        if np.max(np.abs(e_n)) * dt > dv_max:
            raise FieldBlowupError(
                f"field impulse {np.max(np.abs(e_n)) * dt:.3e} exceeds"
                f" {dv_max} at t = {times[n]:.2f}")
        u = u + 0.5 * dt * _field_at(e_n, r, grid)
        r, u = drift_map(r, u, ell2, dt)
        rho[:, n + 1], leak[n + 1], mass[n + 1] = cv.density(r, times[n + 1])
        e[:, n + 1] = radial_poisson(rho[:, n + 1], grid.r)
        u = u + 0.5 * dt * _field_at(e[:, n + 1], r, grid)

    hist = FieldHistory(grid=grid, times=times, rho=rho, e=e,
                        rho_hat=radial_fourier(rho.T, grid).T,
                        mass=mass, leak=leak,
                        meta={"mode": "direct", "eps": f0.eps,
                              "datum": f0.label})
    hist.meta["boundary_peak_ratio"] = hist.boundary_peak_ratio()
    return hist


# ---------------------------------------------------------------------------
# forcing assembly (backward characteristics)
# ---------------------------------------------------------------------------

def assemble_forcing_N(hist: FieldHistory, f0: InitialDatumSpec, t,
                       config: NonlinearConfig | None = None,
                       equilibrium=POISSON):
    """Forcing N(., t) = N1 + N2 from backward characteristics.

    For every anchor radius the full velocity node set is integrated from
    t back to 0 in the stored field (kick-drift-kick, reversed).  N1 is
    the velocity quadrature of f0 at the feet; N2 is the quadrature of
    E . grad M0 accumulated along the free-streaming paths minus the same
    accumulation along the true trajectories, node for node, which makes
    its first-order-in-the-field cancellation explicit.

    Returns a dict with keys r, n1, n2, n2_free, n2_traj, total.
    """
    config = config or NonlinearConfig()
    grid, dt = config.grid, config.dt
    times = config.times
    quad = PhaseQuadrature(config)
    t = float(t)
    n_steps = int(round(t / dt))
    if abs(n_steps * dt - t) > 1e-9:
        raise ValueError("t must sit on the solver time grid")
    sampler = hist.sampler()

    anchors = grid.r[1:]            # r = 0 is filled by the even-limit below
    n_anchor = anchors.size
    n_vel = quad.vel_weights.size
    R = np.repeat(anchors, n_vel)
    U = np.tile(np.repeat(quad.u_nodes, config.n_w), n_anchor)
    W = np.tile(np.tile(quad.w_nodes, config.n_u), n_anchor)
    ell2 = (R * W) ** 2
    vel_w = np.tile(quad.vel_weights, n_anchor)
    s_anchor = np.hypot(U, W)

    # march true and free backward characteristics side by side and
    # accumulate int E . grad M0 ds along each with the same trapezoid
    # weights: the two sums then differ only through the field-driven
    # trajectory perturbation, so their difference (N2) vanishes to first
    # order in the field with the quadrature error cancelling node for
    # node -- evaluating the free half spectrally instead would leave a
    # first-order residue from the finite velocity node set.
    r_b, u_b = R.copy(), U.copy()
    r_f, u_f = R.copy(), U.copy()
    acc_true = np.zeros_like(r_b)
    acc_free = np.zeros_like(r_b)

    def du_m0(r, u):
        w = np.sqrt(ell2) / np.maximum(np.abs(r), 1e-300)
        return equilibrium.du_radial(u, w)

    for m in range(n_steps):
        s_hi = t - m * dt
        e_b = sampler.radial(r_b, s_hi)
        e_f = sampler.radial(r_f, s_hi)
        acc_true += 0.5 * dt * e_b * du_m0(r_b, u_b)
        acc_free += 0.5 * dt * e_f * du_m0(r_f, u_f)
        u_b = u_b - 0.5 * dt * e_b
        r_b, u_b = drift_map(r_b, u_b, ell2, -dt)
        r_f, u_f = drift_map(r_f, u_f, ell2, -dt)
        e_b = sampler.radial(r_b, s_hi - dt)
        e_f = sampler.radial(r_f, s_hi - dt)
        u_b = u_b - 0.5 * dt * e_b
        acc_true += 0.5 * dt * e_b * du_m0(r_b, u_b)
        acc_free += 0.5 * dt * e_f * du_m0(r_f, u_f)

    w_b = np.sqrt(ell2) / np.maximum(np.abs(r_b), 1e-300)
    s_feet = np.hypot(u_b, w_b)
    f0_feet = f0.eps * f0.a_profile(np.abs(r_b)) * f0.b_profile(s_feet)

    n1 = np.sum((vel_w * f0_feet).reshape(n_anchor, n_vel), axis=1)
    n2_traj = np.sum((vel_w * acc_true).reshape(n_anchor, n_vel), axis=1)
    n2_free = np.sum((vel_w * acc_free).reshape(n_anchor, n_vel), axis=1)
    n2_free_full = np.empty(grid.n_r)
    n2_free_full[1:] = n2_free
    n2_free_full[0] = (4 * n2_free[0] - n2_free[1]) / 3.0

    n1_full = np.empty(grid.n_r)
    n1_full[1:] = n1
    n1_full[0] = (4 * n1[0] - n1[1]) / 3.0     # even-function limit at r = 0
    traj_full = np.empty(grid.n_r)
    traj_full[1:] = n2_traj
    traj_full[0] = (4 * n2_traj[0] - n2_traj[1]) / 3.0
    n2 = n2_free_full - traj_full
    return {"r": grid.r, "n1": n1_full, "n2": n2, "n2_free": n2_free_full,
            "n2_traj": traj_full, "total": n1_full + n2}


# ---------------------------------------------------------------------------
# Mode P: density fixed point through the Volterra resolvent
# ---------------------------------------------------------------------------

def run_picard(f0: InitialDatumSpec, config: NonlinearConfig | None = None,
               equilibrium=POISSON) -> FieldHistory:
    """Density fixed point via the Volterra resolvent (Mode P).

    Each sweep pushes the phase-space nodes forward through the frozen
    field iterate, depositing the transported datum plus the closed-form
    source accumulation (the trajectory half of the forcing, evaluated as
    a pushforward rather than per-anchor backward families, which is the
    O(N_t) equivalent of assembling N at every output time).  The update
    is the resolvent-preconditioned defect correction

        rho <- rho + (I + C)^{-1} (deposit(e(rho)) - rho),

    with C the per-mode memory convolution (kernel_table, blended to the
    continuum tail at large t k).  The identity part of (I + C)^{-1} is
    applied in physical space; only the smooth convolution correction
    passes through the mode transforms.  The fixed point is therefore
    rho = deposit(e(rho)) exactly -- the same discrete equation the
    direct march satisfies -- untouched by the band limit of the mode
    grid, while the preconditioner still cancels the sweep's linear
    response so the iteration contracts at the nonlinearity scale.

    The horizon is swept causally: the defect at time t depends only on
    the field before t, so the fixed point is converged on successive
    time windows (window_t wide), each window iterated until the field
    change is below tol_picard.  A perturbation introduced at time s
    displaces quadrature nodes whose deposit differs secularly (growing
    like t - s, with no damping for the node-level granularity), so the
    plain full-horizon iteration is non-contractive over long horizons
    even at small amplitude; restricted to a window the same feedback
    has bounded gain and the inner iteration contracts.  Sustained
    within-window growth aborts with the iterate log attached.
    """
    config = config or NonlinearConfig()
    grid, times, dt = config.grid, config.times, config.dt
    quad = PhaseQuadrature(config)
    volumes = tent_volumes(grid)
    kern = quad.kernel_table(grid.k, times, equilibrium, blend_xi=6.0)

    # initialize from the linearized solution on the mode grid
    rho_hat = np.zeros((grid.k.size, times.size))
    for i, k in enumerate(grid.k):
        forcing = free_streaming_forcing(f0, k, times)
        rho_hat[i] = np.real(apply_resolvent(forcing).values)
    rho = radial_fourier_inverse(rho_hat.T, grid).T
    e = _poisson_columns(rho, grid)

    n_steps = times.size - 1
    n_win = max(1, int(np.ceil(config.t_max / config.window_t)))
    edges = [int(round((w + 1) * n_steps / n_win)) for w in range(n_win)]
    edges = sorted(set(m for m in edges if m > 0)) or [0]

    log = []
    mass = leak = None
    converged = True
    for window, m in enumerate(edges):
        sl = slice(0, m + 1)
        prev_delta = np.inf
        relax = 1.0
        window_ok = False
        for it in range(1, config.n_max_picard + 1):
            sampler = RadialFieldSampler(grid.r, times[sl], e[:, sl])
            d1, mass, leak = _pushforward_sweep(
                f0, config, quad, volumes, sampler, equilibrium, horizon=m)
            defect = d1 - rho[:, sl]
            dhat = radial_fourier(defect.T, grid).T
            chat = solve_volterra_table(dhat, kern[:, sl], dt)
            # smooth part of the resolvent correction back to r-space;
            # the identity part adds the defect without band-limiting
            corr = defect + radial_fourier_inverse((chat - dhat).T, grid).T
            if relax < 1.0:
                corr = relax * corr
            new_rho = rho[:, sl] + corr
            new_e = _poisson_columns(new_rho, grid)

            delta = float(np.max(np.abs(new_e - e[:, sl])))
            ratio = delta / prev_delta if np.isfinite(prev_delta) else np.nan
            log.append({"window": window, "t_end": float(times[m]),
                        "iteration": it, "delta": delta, "ratio": ratio,
                        "relax": relax})
            rho[:, sl] = new_rho
            e[:, sl] = new_e
            if delta < config.tol_picard:
                window_ok = True
                break
            floor = min(row["delta"] for row in log
                        if row["window"] == window)
            if it > 3 and delta > 8.0 * floor:
                raise PicardNonContractionError(
                    f"iterate distance grew from {prev_delta:.3e} to"
                    f" {delta:.3e} in window {window} (t <= {times[m]:.2f})"
                    f" at pass {it}", log=log)
            if config.relax < 1.0 and np.isfinite(ratio) and ratio > 0.9:
                relax = config.relax
            prev_delta = delta
        converged = converged and window_ok

    rho_hat = radial_fourier(rho.T, grid).T
    window_passes = [sum(1 for row in log if row["window"] == w)
                     for w in range(len(edges))]
    hist = FieldHistory(grid=grid, times=times, rho=rho, e=e,
                        rho_hat=rho_hat, mass=mass, leak=leak,
                        meta={"mode": "picard", "eps": f0.eps,
                              "datum": f0.label, "iterations": log,
                              "windows": len(edges),
                              "window_passes": window_passes,
                              "max_window_passes": max(window_passes),
                              "total_sweeps": len(log),
                              "converged": converged})
    hist.meta["boundary_peak_ratio"] = hist.boundary_peak_ratio()
    return hist


def _poisson_columns(rho, grid):
    e = np.empty_like(rho)
    for j in range(rho.shape[1]):
        e[:, j] = radial_poisson(rho[:, j], grid.r)
    return e


def _pushforward_sweep(f0, config, quad, volumes, sampler, equilibrium,
                       horizon=None):
    """Forward kick-drift-kick sweep through a frozen field history.

    Deposits the control-variate density (full values on true nodes minus
    background on free-streaming nodes) at every step; returns
    (d1, mass, leak) where d1(r, t) is the trajectory part N1 - N2_traj
    of the forcing evaluated by pushforward.  ``horizon`` caps the sweep
    at a time index (inclusive); the default covers the full grid.
    """
    grid, times, dt = config.grid, config.times, config.dt
    cv = _ControlVariate(f0, quad, grid, volumes, equilibrium)
    r, u = quad.r.copy(), quad.u.copy()
    ell2 = quad.ell ** 2

    n_t = times.size if horizon is None else horizon + 1
    d1 = np.zeros((grid.n_r, n_t))
    mass = np.zeros(n_t)
    leak = np.zeros(n_t)
    d1[:, 0], leak[0], mass[0] = cv.density(r, 0.0)

    for n in range(n_t - 1):
        u = u + 0.5 * dt * sampler.radial(r, times[n])
        r, u = drift_map(r, u, ell2, dt)
        u = u + 0.5 * dt * sampler.radial(r, times[n + 1])
        d1[:, n + 1], leak[n + 1], mass[n + 1] = cv.density(r, times[n + 1])
    return d1, mass, leak


def volterra_residual(hist: FieldHistory, f0: InitialDatumSpec,
                      config: NonlinearConfig | None = None,
                      equilibrium=POISSON):
    """Per-mode residual rho_hat + kernel*rho_hat - N_hat of a Mode-P run.

    N_hat is re-evaluated from a fresh pushforward sweep through the
    stored field plus the kernel convolution of the stored density; the
    convolution terms cancel, so this measures how exactly the stored
    density reproduces its own transported deposit -- the converged fixed
    point satisfies it to the final iterate distance.
    """
    config = config or NonlinearConfig()
    quad = PhaseQuadrature(config)
    volumes = tent_volumes(config.grid)
    sampler = hist.sampler()
    d1, _, _ = _pushforward_sweep(f0, config, quad, volumes, sampler,
                                  equilibrium)
    return np.max(np.abs(hist.rho_hat - radial_fourier(d1.T, config.grid).T),
                  axis=1)

import numpy as np
import pytest

from landau3d.characteristics import (
    AnalyticField,
    AnalyticRadialField,
    FieldBlowupError,
    PicardDivergenceError,
    RadialFieldSampler,
    ZeroField,
    deviation_picard,
    integrate_backward,
    integrate_forward,
    integrate_reduced,
    round_trip_error,
)


def smooth_field(amplitude=1.0):
    # E = grad psi with psi = exp(-|x|^2) cos t
    def func(x, t):
        return -2.0 * amplitude * x * np.exp(-np.sum(x ** 2, axis=-1))[..., None] * np.cos(t)
    return AnalyticField(func)


def s_grid_down(t, ds):
    return np.arange(t, -ds / 2, -ds)


def test_free_streaming():
    x = np.array([1.0, -2.0, 0.5])
    v = np.array([0.3, 0.1, -0.2])
    t = 5.0
    s = s_grid_down(t, 0.1)
    traj = integrate_backward((x, v), t, s, ZeroField())
    expect = x[None, None, :] - (t - s)[None, :, None] * v[None, None, :]
    assert np.max(np.abs(traj.X - expect)) < 1e-13
    assert np.max(np.abs(traj.V - v)) < 1e-13
    assert np.max(np.abs(traj.Y)) < 1e-13
    assert np.max(np.abs(traj.W)) < 1e-13


def test_constant_field_analytic():
    E0 = np.array([0.2, -0.1, 0.05])
    fieldc = AnalyticField(lambda x, t: np.broadcast_to(E0, x.shape))
    x = np.array([0.0, 1.0, 0.0])
    v = np.array([1.0, 0.0, 0.0])
    t = 4.0
    s = s_grid_down(t, 0.05)
    traj = integrate_backward((x, v), t, s, fieldc)
    dt = (t - s)[None, :, None]
    assert np.max(np.abs(traj.V - (v - dt * E0))) < 1e-12
    assert np.max(np.abs(traj.X - (x - dt * v + 0.5 * dt ** 2 * E0))) < 1e-12


def test_anchor_identities():
    traj = integrate_backward((np.ones(3), np.ones(3) * 0.2), 3.0,
                              s_grid_down(3.0, 0.1), smooth_field(0.1))
    assert np.all(traj.Y[:, 0] == 0)
    assert np.all(traj.W[:, 0] == 0)


def test_rk4_order():
    field = smooth_field()
    seed = (np.array([0.5, 0.0, 0.0]), np.array([0.4, 0.3, 0.0]))
    t = 2.0
    ref = integrate_backward(seed, t, s_grid_down(t, 0.00125), field)
    errs = []
    steps = [0.04, 0.02, 0.01]
    for ds in steps:
        traj = integrate_backward(seed, t, s_grid_down(t, ds), field)
        errs.append(np.linalg.norm(traj.X[0, -1] - ref.X[0, -1])
                    + np.linalg.norm(traj.V[0, -1] - ref.V[0, -1]))
    order = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    assert order == pytest.approx(4.0, abs=0.2)


def test_blowup_guard():
    field = AnalyticField(lambda x, t: np.full_like(x, 50.0))
    with pytest.raises(FieldBlowupError):
        integrate_backward((np.zeros(3), np.zeros(3)), 2.0,
                           s_grid_down(2.0, 0.1), field, dv_max=1.0)


def test_reduced_free_motion_invariant():
    zero = AnalyticRadialField(lambda r, t: np.zeros_like(r), r_max=50.0)
    t = 6.0
    s = s_grid_down(t, 0.01)
    traj = integrate_reduced((np.array([2.0]), np.array([-0.8]), np.array([1.5])),
                             t, s, zero)
    speed2 = traj.V ** 2 + traj.ell[:, None] ** 2 / traj.X ** 2
    assert np.max(np.abs(speed2 - speed2[:, :1])) < 1e-8


def test_reduced_matches_full_3d():
    def e_func(r, t):
        return 0.05 * r * np.exp(-r ** 2) * np.cos(t)

    radial = AnalyticRadialField(e_func, r_max=50.0)
    r0, u0, w0 = 1.5, -0.4, 0.6
    t = 5.0
    s = s_grid_down(t, 0.005)
    red = integrate_reduced((np.array([r0]), np.array([u0]), np.array([r0 * w0])),
                            t, s, radial)
    x = np.array([r0, 0.0, 0.0])
    v = np.array([u0, w0, 0.0])
    full = integrate_backward((x, v), t, s, radial)
    r_full = np.linalg.norm(full.X[0], axis=-1)
    assert np.max(np.abs(red.X[0] - r_full)) < 1e-7


def test_reduced_kepler_energy():
    kepler = AnalyticRadialField(lambda r, t: -1.0 / np.maximum(r, 1e-6) ** 2,
                                 r_max=50.0)
    t = 8.0
    s = s_grid_down(t, 0.002)
    r0, u0, ell = 1.0, 0.3, 0.9
    traj = integrate_reduced((np.array([r0]), np.array([u0]), np.array([ell])),
                             t, s, kepler)
    energy = 0.5 * traj.V ** 2 + 0.5 * traj.ell[:, None] ** 2 / traj.X ** 2 \
        - 1.0 / traj.X
    assert np.max(np.abs(energy - energy[:, :1])) < 1e-6
    assert traj.min_r[0] > 0


def test_radial_sampler_outside_box_warns_and_zeros():
    r = np.linspace(0, 5, 50)
    tg = np.linspace(0, 2, 20)
    e = np.outer(r, np.ones_like(tg))
    sampler = RadialFieldSampler(r, tg, e)
    with pytest.warns(UserWarning):
        val = sampler.radial(np.array([10.0]), np.array([1.0]))
    assert val[0] == 0.0
    assert np.allclose(sampler(np.zeros((1, 3)), 0.5)[0], 0.0)


def test_picard_zero_field():
    Y, W, n = deviation_picard((np.ones(3), np.ones(3)), 3.0,
                               s_grid_down(3.0, 0.1), ZeroField())
    assert n <= 2
    assert np.max(np.abs(Y)) == 0 and np.max(np.abs(W)) == 0


def test_picard_constant_field():
    E0 = np.array([0.1, 0.0, -0.2])
    fieldc = AnalyticField(lambda x, t: np.broadcast_to(E0, x.shape))
    t = 3.0
    s = s_grid_down(t, 0.05)
    Y, W, n = deviation_picard((np.zeros(3), np.zeros(3)), t, s, fieldc)
    dt = (t - s)[None, :, None]
    assert np.max(np.abs(W - (-dt * E0))) < 1e-12
    assert np.max(np.abs(Y - 0.5 * dt ** 2 * E0)) < 1e-12


def test_picard_matches_integrator():
    field = smooth_field(0.05)
    seed = (np.array([0.5, 0.2, 0.0]), np.array([0.4, -0.3, 0.1]))
    t = 4.0
    s = s_grid_down(t, 0.002)
    Y, W, n = deviation_picard(seed, t, s, field)
    assert n <= 8
    traj = integrate_backward(seed, t, s, field)
    assert np.max(np.abs(Y - traj.Y)) < 1e-6
    assert np.max(np.abs(W - traj.W)) < 1e-6
    # dY/ds = W by centered differences
    dY = np.gradient(Y[0], s, axis=0)
    assert np.max(np.abs(dY[1:-1] - W[0, 1:-1])) < 1e-4


def test_picard_divergence_detected():
    # superlinear field whose solutions blow up: the iterates must grow and
    # the non-contraction check must fire
    field = AnalyticField(lambda x, t: 5.0 * x ** 2)
    with pytest.raises(PicardDivergenceError):
        deviation_picard((np.array([1.0, 0.0, 0.0]), np.zeros(3)), 3.0,
                         s_grid_down(3.0, 0.05), field)


def test_y_is_integral_of_w():
    field = smooth_field(0.1)
    seed = (np.array([0.3, 0.0, 0.0]), np.array([0.2, 0.5, 0.0]))
    t = 3.0
    s = s_grid_down(t, 0.005)
    traj = integrate_backward(seed, t, s, field)
    # Y(0) = -int_0^t W dtau; trapezoid over the decreasing grid already
    # carries the sign flip
    expected = np.trapezoid(traj.W[0], s, axis=0)
    assert np.max(np.abs(traj.Y[0, -1] - expected)) < 1e-6


def test_round_trip():
    field = smooth_field(0.2)
    err = round_trip_error((np.array([0.4, -0.1, 0.3]),
                            np.array([0.5, 0.2, -0.3])),
                           5.0, s_grid_down(5.0, 0.01), field)
    assert err < 1e-8

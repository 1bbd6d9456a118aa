import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dgvf.robot import (
    ControlInputs,
    IntegratorRobot,
    Saturation,
    UnicycleRobot,
    integrator_derivative,
    saturate,
    unicycle_controls,
    unicycle_controls_batch,
    unicycle_derivative,
    wrap_angle,
)
from oracles import brute_force_wrap


def rk4(f, y, dt, steps):
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_pythagorean_speed_and_climb():
    u = unicycle_controls([3.0, 4.0, 7.0, 0.0, 0.0], 0.0, 2.0)
    assert (u.v, u.u_z) == (5.0, 7.0)


def test_zero_heading_error():
    X = [1.0, -2.0, 0.5, 0.0, 0.0]
    u = unicycle_controls(X, math.atan2(-2.0, 1.0), 3.0)
    assert u.u_theta == 0.0


def test_wrap_turns_the_short_way():
    u = unicycle_controls([1.0, 0.0, 0.0], math.pi - 0.1, 1.0)
    assert u.u_theta == pytest.approx(-(math.pi - 0.1))


@given(st.floats(-100, 100, allow_nan=False))
@settings(max_examples=500)
def test_wrap_matches_brute_force(a):
    w = float(wrap_angle(a))
    assert -math.pi < w <= math.pi
    assert w == pytest.approx(brute_force_wrap(a), abs=1e-9)


def test_wrap_boundaries():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)


@given(st.lists(st.floats(-50, 50), min_size=5, max_size=5), st.floats(-3.14, 3.14))
@settings(max_examples=200)
def test_climb_rate_equals_third_component(X, theta):
    u = unicycle_controls(X, theta, 2.0)
    if not u.degenerate:
        assert u.u_z == pytest.approx(X[2], rel=1e-12, abs=1e-12)


def test_degenerate_field_holds_heading():
    u = unicycle_controls([0.0, 0.0, 1.0, 0.0, 0.0], 0.3, 2.0, theta_d_hold=1.0)
    assert u.degenerate and u.v == 0.0 and u.theta_d == 1.0
    assert u.u_theta == pytest.approx(2.0 * 0.7)


def test_saturation_clamps_each_channel():
    lim = Saturation(v=0.2, uz=0.1, utheta=3.0)
    u = unicycle_controls([3.0, 4.0, -7.0, 0.0, 0.0], 2.5, 10.0, lim)
    assert u.v == 0.2 and u.u_z == -0.1 and u.u_theta == -3.0


@given(st.floats(0, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_saturation_idempotent(v, uz, ut):
    lim = Saturation(v=1.0, uz=0.5, utheta=2.0)
    once = saturate(v, uz, ut, lim)
    assert saturate(*once, lim) == once
    assert saturate(v, uz, ut, Saturation(v=1.0))[1:] == (uz, ut)


def test_saturation_limits_positive():
    with pytest.raises(ValueError):
        Saturation(v=0.0)


def test_batch_matches_scalar():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 5))
    X[3, :2] = 0.0
    theta = rng.uniform(-3, 3, size=50)
    hold = rng.uniform(-3, 3, size=50)
    lim = Saturation(v=1.0, uz=0.5, utheta=2.0)
    v, uz, ut, td, deg = unicycle_controls_batch(X, theta, 1.5, lim, hold)
    for i in range(50):
        u = unicycle_controls(X[i], theta[i], 1.5, lim, hold[i])
        assert (v[i], uz[i], ut[i], td[i], deg[i]) == pytest.approx((u.v, u.u_z, u.u_theta, u.theta_d, u.degenerate))


def test_derivative_examples():
    r = UnicycleRobot(np.zeros(3), 0.0, 0.0, 0.0)
    X = np.array([0.0, 0.0, 0.0, 1.5, -0.5])
    d = unicycle_derivative(r, ControlInputs(0.0, 0.3, 0.1, 0.0), X)
    np.testing.assert_allclose(d, [0, 0, 0.3, 0.1, 1.5, -0.5])
    d = unicycle_derivative(r, ControlInputs(5.0, 0.2, 0.0, 0.0), X)
    np.testing.assert_allclose(d[:3], [5, 0, 0.2])
    xi = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    np.testing.assert_array_equal(integrator_derivative(IntegratorRobot(xi), xi * 2), xi * 2)


def test_rk4_circular_arc_is_fourth_order():
    v, uz, om = 2.0, 0.3, 0.8
    u = ControlInputs(v, uz, om, 0.0)
    X = np.array([0, 0, 0, 0.0, 0.0])

    def f(y):
        r = UnicycleRobot(y[:3], y[3], y[4], y[5])
        r.theta = y[3]  # keep the continuous angle inside a stage
        return unicycle_derivative(r, u, X)

    T = 2.0
    exact = np.array([v / om * math.sin(om * T), v / om * (1 - math.cos(om * T)), uz * T, om * T, 0.0, 0.0])
    errs = []
    for dt in (0.1, 0.05, 0.025):
        y = rk4(f, np.zeros(6), dt, int(round(T / dt)))
        errs.append(np.max(np.abs(y - exact)))
    assert errs[0] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.15)
    assert errs[1] / errs[2] == pytest.approx(16, rel=0.15)


@pytest.mark.parametrize("e0", [0.1, 1.0, 3.0])
def test_heading_error_decays_exponentially(e0):
    theta_d = 0.4
    X = np.array([math.cos(theta_d), math.sin(theta_d), 0.0, 1.0, 0.0])

    def f(th):
        return np.array([unicycle_controls(X, float(th[0]), 2.0).u_theta])

    th = np.array([theta_d - e0])
    dt = 1e-3
    worst = 0.0
    for k in range(1, 5001):
        th = rk4(f, th, dt, 1)
        e = float(wrap_angle(theta_d - th[0]))
        worst = max(worst, abs(e - e0 * math.exp(-2.0 * k * dt)))
    assert worst < 1e-6


def test_unicycle_theta_wrapped_on_construction():
    assert UnicycleRobot(np.zeros(3), 4.0, 0.0, 0.0).theta == pytest.approx(4.0 - 2 * math.pi)
    with pytest.raises(ValueError):
        UnicycleRobot(np.zeros(3), 0.0, 0.0, 0.0, k_theta=0.0)

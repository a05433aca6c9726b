import numpy as np
import pytest

from bblr.blr import BarrierBasis
from bblr.dynamics import (
    BarrierFunction,
    ControlAffineSystem,
    ellipsoid_barrier,
    pendulum_system,
)
from bblr.lie_data import (
    LearningConfig,
    SampleWindow,
    build_regression_set,
    sigma_diff,
)


def unit_drift_system():
    """x0_dot = 1 + u, x1_dot = 0; with h = x0 the Lie derivative is 1 + u."""
    sys = ControlAffineSystem(
        state_dim=2,
        input_dim=1,
        drift=lambda x: np.array([1.0, 0.0]),
        input_matrix=lambda x: np.array([[1.0], [0.0]]),
    )
    bf = BarrierFunction(
        value=lambda x: float(x[0]),
        gradient=lambda x: np.array([1.0, 0.0]),
        h_max=1.0,
        domain_lo=np.array([-10.0, -10.0]),
        domain_hi=np.array([10.0, 10.0]),
    )
    return sys, bf


def test_window_push_and_eviction():
    win = SampleWindow(capacity=3)
    assert len(win) == 0
    win.push(np.zeros(2), np.zeros(1), 1.0, 0)
    assert len(win) == 1
    for k in range(1, 4):
        win.push(np.zeros(2), np.zeros(1), 1.0, k)
    assert len(win) == 4  # capacity + 1 states
    win.push(np.zeros(2), np.zeros(1), 1.0, 4)
    assert len(win) == 4
    assert win.entries[0].t_index == 1  # oldest evicted


def test_window_rejects_gaps():
    win = SampleWindow(capacity=3)
    win.push(np.zeros(2), np.zeros(1), 1.0, 3)
    with pytest.raises(ValueError):
        win.push(np.zeros(2), np.zeros(1), 1.0, 5)


def test_regression_target_hand_example():
    sys, bf = unit_drift_system()
    basis = BarrierBasis(degrees=(1,), input_dim=1, u_max=5.0)
    win = SampleWindow(capacity=5)
    win.push(np.array([0.50, 0.0]), np.array([0.0]), 0.50, 0)
    win.push(np.array([0.52, 0.0]), np.array([0.0]), 0.52, 1)
    pairs = build_regression_set(win, sys, bf, basis, dt=0.01)
    assert len(pairs) == 1
    phi, y = pairs[0]
    # fd = 2.0, nominal Lie derivative = 1.0
    assert y == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(phi, [0.50, 0.0])


def test_equilibrium_window_gives_zero_targets():
    true_sys = pendulum_system(1.0, 1.0)
    bf = ellipsoid_barrier(np.pi, 5.0)
    basis = BarrierBasis(degrees=(1, 2), input_dim=1, u_max=25.0)
    win = SampleWindow(capacity=4)
    for k in range(5):
        win.push(np.zeros(2), np.zeros(1), 1.0, k)
    pairs = build_regression_set(win, true_sys, bf, basis, dt=0.01)
    assert len(pairs) == 4
    for _, y in pairs:
        assert y == pytest.approx(0.0, abs=1e-15)


def test_regression_set_requires_two_samples():
    sys, bf = unit_drift_system()
    basis = BarrierBasis(degrees=(1,), input_dim=1, u_max=5.0)
    win = SampleWindow(capacity=3)
    win.push(np.zeros(2), np.zeros(1), 0.0, 0)
    with pytest.raises(ValueError):
        build_regression_set(win, sys, bf, basis, dt=0.01)


def test_sigma_diff_examples():
    assert sigma_diff(50.0, 0.01) == pytest.approx(0.25)
    assert sigma_diff(2.0, 1.0) == pytest.approx(1.0)
    assert sigma_diff(50.0, 0.005) < sigma_diff(50.0, 0.01)
    with pytest.raises(ValueError):
        sigma_diff(0.0, 0.01)
    with pytest.raises(ValueError):
        sigma_diff(1.0, -0.1)


def _rk4(deriv, x, dt):
    k1 = deriv(x)
    k2 = deriv(x + 0.5 * dt * k1)
    k3 = deriv(x + 0.5 * dt * k2)
    k4 = deriv(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def test_zero_mismatch_targets_bounded_by_sigma_diff():
    # With nominal == true, the targets are pure differentiation error, which
    # must obey |y| <= c*dt/2 for c estimated from a densely sampled h(t).
    true_sys = pendulum_system(1.0, 1.0)
    bf = ellipsoid_barrier(np.pi, 5.0)
    basis = BarrierBasis(degrees=(1, 2), input_dim=1, u_max=25.0)
    dt, substeps, n_steps = 0.01, 10, 200
    dt_sub = dt / substeps

    win = SampleWindow(capacity=n_steps)
    x = np.array([0.5, 0.0])
    h_dense = [bf.value(x)]
    for k in range(n_steps + 1):
        u = np.array([2.0 * np.sin(0.1 * k)])
        win.push(x, u, bf.value(x), k)
        for _ in range(substeps):
            x = _rk4(lambda s: true_sys.derivative(s, u), x, dt_sub)
            h_dense.append(bf.value(x))

    h_dense = np.array(h_dense)
    c_est = np.max(np.abs(np.diff(h_dense, n=2))) / dt_sub**2
    bound = sigma_diff(c_est, dt)

    pairs = build_regression_set(win, true_sys, bf, basis, dt)
    assert len(pairs) == n_steps
    worst = max(abs(y) for _, y in pairs)
    assert worst <= bound


def test_learning_config_window_steps():
    cfg = LearningConfig(window_seconds=0.2)
    assert cfg.window_steps(0.01) == 20
    assert cfg.window_steps(0.005) == 40
    with pytest.raises(ValueError):
        LearningConfig(window_seconds=0.0)

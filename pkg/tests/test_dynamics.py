import numpy as np
import pytest

from bblr.dynamics import (
    ellipsoid_barrier,
    estimate_h_max,
    lie_derivatives,
    pendulum_system,
)

THETA_MAX = np.pi
THETADOT_MAX = 5.0


def default_pair():
    true_sys = pendulum_system(length_m=1.0, mass_kg=1.0, gravity=9.81)
    nominal = pendulum_system(length_m=1.0, mass_kg=0.96, gravity=9.81)
    bf = ellipsoid_barrier(THETA_MAX, THETADOT_MAX)
    return true_sys, nominal, bf


def test_pendulum_drift_examples():
    true_sys, nominal, _ = default_pair()
    np.testing.assert_allclose(true_sys.drift(np.array([0.0, 0.0])), [0.0, 0.0])
    np.testing.assert_allclose(
        true_sys.drift(np.array([np.pi / 2, 0.0])), [0.0, -9.81], atol=1e-12
    )
    # nominal input gain 1/(0.96 * 1^2)
    col = nominal.input_matrix(np.array([0.3, 0.1]))
    np.testing.assert_allclose(col, [[0.0], [1.0 / 0.96]])


def test_pendulum_rejects_bad_parameters():
    with pytest.raises(ValueError):
        pendulum_system(length_m=0.0, mass_kg=1.0)
    with pytest.raises(ValueError):
        pendulum_system(length_m=1.0, mass_kg=-2.0)


def test_ellipsoid_barrier_examples():
    bf = ellipsoid_barrier(THETA_MAX, THETADOT_MAX)
    assert bf.value(np.array([0.0, 0.0])) == 1.0
    assert bf.value(np.array([np.pi, 0.0])) == pytest.approx(0.0, abs=1e-15)
    assert bf.value(np.array([np.pi / 2, 2.5])) == pytest.approx(0.5, abs=1e-15)
    assert bf.h_max == 1.0
    assert bf.in_safe_set(np.array([1.0, 1.0]))
    assert not bf.in_safe_set(np.array([np.pi, 1.0]))


def test_lie_derivative_examples():
    true_sys, _, bf = default_pair()
    lf, lg = lie_derivatives(true_sys, bf, np.array([np.pi, 0.0]))
    assert lf == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(lg, [0.0], atol=1e-15)

    # -(1/pi)*1 + (-2/25)*(-9.81)
    lf, lg = lie_derivatives(true_sys, bf, np.array([np.pi / 2, 1.0]))
    assert lf == pytest.approx(-1.0 / np.pi + 2.0 * 9.81 / 25.0, abs=1e-12)
    np.testing.assert_allclose(lg, [-2.0 / 25.0], atol=1e-15)

    # zero gradient at the ellipse center
    lf, lg = lie_derivatives(true_sys, bf, np.array([0.0, 0.0]))
    assert lf == 0.0
    np.testing.assert_allclose(lg, [0.0])


def test_lie_derivatives_domain_violation():
    true_sys, _, bf = default_pair()
    outside = np.array([1.2 * np.pi, 0.0])
    with pytest.raises(ValueError):
        lie_derivatives(true_sys, bf, outside)
    # explicit opt-out used by the trajectory logger
    lf, lg = lie_derivatives(true_sys, bf, outside, check_domain=False)
    assert np.isfinite(lf) and np.all(np.isfinite(lg))


def test_gradient_matches_central_differences():
    _, _, bf = default_pair()
    rng = np.random.default_rng(23)
    step = 1e-6
    for _ in range(100):
        x = rng.uniform(bf.domain_lo, bf.domain_hi)
        grad = bf.gradient(x)
        fd = np.zeros_like(x)
        for i in range(x.size):
            dx = np.zeros_like(x)
            dx[i] = step
            fd[i] = (bf.value(x + dx) - bf.value(x - dx)) / (2.0 * step)
        denom = max(np.linalg.norm(grad), 1.0)
        assert np.linalg.norm(grad - fd) / denom <= 1e-5


def test_gradient_nonzero_near_boundary():
    _, _, bf = default_pair()
    for ang in np.linspace(0.0, 2.0 * np.pi, 36, endpoint=False):
        x = np.array([THETA_MAX * np.cos(ang), THETADOT_MAX * np.sin(ang)])
        assert abs(bf.value(x)) <= 1e-12
        assert np.linalg.norm(bf.gradient(x)) > 0.0


def test_projected_residual_affine_in_u():
    true_sys, nominal, bf = default_pair()
    rng = np.random.default_rng(29)
    for _ in range(20):
        x = rng.uniform(bf.domain_lo, bf.domain_hi)
        lf_t, lg_t = lie_derivatives(true_sys, bf, x)
        lf_n, lg_n = lie_derivatives(nominal, bf, x)

        def delta(u):
            return (lf_t - lf_n) + float((lg_t - lg_n) @ u)

        u0, u1 = np.array([-3.0]), np.array([5.0])
        umid = 0.5 * (u0 + u1)
        assert delta(umid) == pytest.approx(0.5 * (delta(u0) + delta(u1)), abs=1e-12)


def test_estimate_h_max_matches_analytic_ellipsoid():
    bf = ellipsoid_barrier(THETA_MAX, THETADOT_MAX)
    est = estimate_h_max(bf.value, bf.domain_lo, bf.domain_hi)
    assert est == pytest.approx(1.0, abs=1e-3)

import numpy as np
import pytest

from bblr import classk
from bblr.blr import (
    BarrierBasis,
    GaussianPosterior,
    batch_fit,
    features,
    posterior_from_dict,
    posterior_to_dict,
    predict,
    predicted_residual,
    residual_bound,
    standard_prior,
    update,
)


def test_features_examples():
    basis = BarrierBasis(degrees=(1, 2), input_dim=1, u_max=3.0)
    np.testing.assert_allclose(
        features(basis, 0.5, np.array([2.0])), [0.5, 0.25, 1.0, 0.5]
    )
    np.testing.assert_allclose(features(basis, 0.0, np.array([1.0])), np.zeros(4))
    basis1 = BarrierBasis(degrees=(1,), input_dim=1, u_max=3.0)
    np.testing.assert_allclose(features(basis1, 0.3, np.array([0.0])), [0.3, 0.0])


def test_features_clamps_negative_h_with_warning():
    basis = BarrierBasis(degrees=(1, 2), input_dim=1, u_max=3.0)
    with pytest.warns(RuntimeWarning):
        phi = features(basis, -0.01, np.array([1.0]))
    np.testing.assert_allclose(phi, np.zeros(4))


def test_features_rejects_out_of_bound_input():
    basis = BarrierBasis(degrees=(1,), input_dim=1, u_max=3.0)
    with pytest.raises(ValueError):
        features(basis, 0.5, np.array([3.5]))


def test_basis_validation():
    with pytest.raises(ValueError):
        BarrierBasis(degrees=(), input_dim=1, u_max=1.0)
    with pytest.raises(ValueError):
        BarrierBasis(degrees=(0,), input_dim=1, u_max=1.0)
    with pytest.raises(ValueError):
        BarrierBasis(degrees=(1,), input_dim=1, u_max=0.0)


def test_update_closed_form_example():
    prior = standard_prior(1, prior_std=1.0)
    post = update(prior, np.array([1.0]), 1.0, noise_var=1.0)
    # precision 1 + 1 = 2, covariance 0.5, mean 0.5 * (0 + 1)
    np.testing.assert_allclose(post.mean, [0.5])
    np.testing.assert_allclose(post.covariance, [[0.5]])
    assert post.sample_count == 1


def test_update_with_zero_features_is_inert():
    prior = standard_prior(3, prior_std=2.0)
    post = update(prior, np.zeros(3), 5.0, noise_var=0.1)
    np.testing.assert_array_equal(post.mean, prior.mean)
    np.testing.assert_array_equal(post.covariance, prior.covariance)
    assert post.sample_count == 1


def test_two_updates_equal_one_batch_fit():
    rng = np.random.default_rng(31)
    prior = standard_prior(4, prior_std=1.3)
    phis = rng.normal(size=(2, 4))
    ys = rng.normal(size=2)
    seq = update(update(prior, phis[0], ys[0], 0.3), phis[1], ys[1], 0.3)
    bat = batch_fit(prior.mean, prior.covariance, phis, ys, 0.3)
    np.testing.assert_allclose(seq.mean, bat.mean, atol=1e-10)
    np.testing.assert_allclose(seq.covariance, bat.covariance, atol=1e-10)


def test_batch_fit_empty_returns_prior():
    prior_mean = np.array([0.2, -0.1])
    prior_cov = np.diag([4.0, 9.0])
    post = batch_fit(prior_mean, prior_cov, np.zeros((0, 2)), np.zeros(0), 1.0)
    np.testing.assert_array_equal(post.mean, prior_mean)
    np.testing.assert_array_equal(post.covariance, prior_cov)
    assert post.sample_count == 0


def test_batch_fit_recovers_least_squares_with_wide_prior():
    rng = np.random.default_rng(37)
    w_star = rng.normal(size=5)
    design = rng.normal(size=(40, 5))
    targets = design @ w_star
    post = batch_fit(np.zeros(5), 1e8 * np.eye(5), design, targets, noise_var=1e-8)
    lstsq = np.linalg.lstsq(design, targets, rcond=None)[0]
    np.testing.assert_allclose(post.mean, lstsq, atol=1e-3)


def test_recursive_matches_batch_under_permutation():
    rng = np.random.default_rng(41)
    prior = standard_prior(6, prior_std=0.8)
    design = rng.normal(size=(25, 6))
    targets = rng.normal(size=25)
    noise_var = 0.2
    bat = batch_fit(prior.mean, prior.covariance, design, targets, noise_var)
    for _ in range(5):
        order = rng.permutation(25)
        post = prior
        for idx in order:
            post = update(post, design[idx], targets[idx], noise_var)
        np.testing.assert_allclose(post.mean, bat.mean, atol=1e-8)
        np.testing.assert_allclose(post.covariance, bat.covariance, atol=1e-8)


def test_covariance_stays_symmetric_positive_definite():
    rng = np.random.default_rng(43)
    post = standard_prior(5, prior_std=1.0)
    for _ in range(100):
        post = update(post, rng.normal(size=5), rng.normal(), 0.05)
    assert np.max(np.abs(post.covariance - post.covariance.T)) <= 1e-12
    assert np.all(np.linalg.eigvalsh(post.covariance) > 0.0)


def test_predict_examples():
    prior = standard_prior(1, prior_std=1.0)
    post = update(prior, np.array([1.0]), 1.0, noise_var=1.0)
    mean, var = predict(post, np.array([1.0]), noise_var=1.0)
    assert mean == pytest.approx(0.5)
    assert var == pytest.approx(1.5)

    mean, var = predict(post, np.zeros(1), noise_var=0.3)
    assert mean == 0.0
    assert var == pytest.approx(0.3)

    mean, var = predict(standard_prior(1), np.array([2.0]), noise_var=1.0)
    assert mean == 0.0
    assert var == pytest.approx(5.0)


def test_predict_variance_modes():
    post = standard_prior(2)
    phi = np.array([1.0, 0.0])
    _, add_var = predict(post, phi, noise_var=0.25, variance_mode="additive")
    _, inv_var = predict(post, phi, noise_var=0.25, variance_mode="inverse")
    assert add_var == pytest.approx(1.25)
    assert inv_var == pytest.approx(5.0)
    with pytest.raises(ValueError):
        predict(post, phi, noise_var=0.25, variance_mode="bogus")


def test_residual_bound_examples():
    basis = BarrierBasis(degrees=(1,), input_dim=1, u_max=3.0)
    post = GaussianPosterior(mean=np.array([2.0, -1.0]), covariance=np.eye(2))
    bound = residual_bound(post, basis)
    # |2| + |-1| * 3 = 5, linear
    for r in (0.2, 0.5, 1.0):
        assert classk.evaluate(bound, r) == pytest.approx(5.0 * r)

    zero_post = GaussianPosterior(mean=np.zeros(2), covariance=np.eye(2))
    assert residual_bound(zero_post, basis).is_degenerate

    basis2 = BarrierBasis(degrees=(1, 2), input_dim=0, u_max=1.0)
    post2 = GaussianPosterior(mean=np.array([1.0, 1.0]), covariance=np.eye(2))
    bound2 = residual_bound(post2, basis2)
    for r in (0.1, 0.7):
        assert classk.evaluate(bound2, r) == pytest.approx(r + r**2)


def test_predicted_residual_examples():
    basis = BarrierBasis(degrees=(1,), input_dim=1, u_max=3.0)
    post = GaussianPosterior(mean=np.array([2.0, -1.0]), covariance=np.eye(2))

    alpha, beta, delta = predicted_residual(post, basis, 0.0, np.array([1.0]))
    assert alpha == 0.0 and delta == 0.0
    np.testing.assert_array_equal(beta, [0.0])

    alpha, beta, delta = predicted_residual(post, basis, 0.5, np.array([1.0]))
    assert alpha == pytest.approx(1.0)
    np.testing.assert_allclose(beta, [-0.5])
    assert delta == pytest.approx(0.5)

    # consistency with the predictive mean
    phi = features(basis, 0.5, np.array([1.0]))
    mean, _ = predict(post, phi, noise_var=1.0)
    assert delta == pytest.approx(mean, abs=1e-14)


def test_residual_bound_dominates_predictions():
    # the executable form of the construction guarantee
    rng = np.random.default_rng(47)
    basis = BarrierBasis(degrees=(1, 2, 3, 4, 5), input_dim=1, u_max=25.0)
    h_grid = np.linspace(0.0, 1.0, 21)
    u_grid = np.linspace(-25.0, 25.0, 11)
    for _ in range(25):
        post = GaussianPosterior(
            mean=rng.uniform(-5.0, 5.0, size=basis.size), covariance=np.eye(basis.size)
        )
        bound = residual_bound(post, basis)
        for h in h_grid:
            floor = -classk.evaluate(bound, float(h))
            for u in u_grid:
                _, _, delta = predicted_residual(post, basis, float(h), np.array([u]))
                assert delta >= floor - 1e-10
        # exact annihilation at the boundary
        _, _, delta0 = predicted_residual(post, basis, 0.0, np.array([17.0]))
        assert delta0 == 0.0


def test_calibration_against_synthetic_truth():
    rng = np.random.default_rng(53)
    basis = BarrierBasis(degrees=(1, 2), input_dim=1, u_max=3.0)
    noise_std = 0.5
    hits = 0
    trials = 200
    for _ in range(trials):
        w_star = rng.normal(size=basis.size)
        design = np.stack(
            [
                features(basis, rng.uniform(0.0, 1.0), rng.uniform(-3.0, 3.0, size=1))
                for _ in range(30)
            ]
        )
        targets = design @ w_star + noise_std * rng.normal(size=30)
        post = batch_fit(
            np.zeros(basis.size), np.eye(basis.size), design, targets, noise_std**2
        )
        stds = np.sqrt(np.diag(post.covariance))
        if np.all(np.abs(w_star - post.mean) <= 3.0 * stds):
            hits += 1
    assert hits / trials >= 0.95


def test_posterior_json_round_trip():
    rng = np.random.default_rng(59)
    post = standard_prior(4)
    for _ in range(6):
        post = update(post, rng.normal(size=4), rng.normal(), 0.2)
    back = posterior_from_dict(posterior_to_dict(post))
    np.testing.assert_allclose(back.mean, post.mean)
    np.testing.assert_allclose(back.covariance, post.covariance)
    assert back.sample_count == post.sample_count

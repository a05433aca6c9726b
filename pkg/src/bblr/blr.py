"""Bayesian linear regression over a barrier-composed monomial basis.

The regression target is the Lie-derivative residual between the true and
nominal systems. Features are monomials of the barrier value h, replicated
once per input channel:

    features(h, u) = (phi_1(h) .. phi_N(h),
                      u_1 * phi_1(h) .. u_1 * phi_N(h),
                      ...,
                      u_m * phi_1(h) .. u_m * phi_N(h))

with phi_j(h) = h**d_j and d_j >= 1. Every basis function vanishes at h = 0,
so any weight vector predicts a zero residual on the safe-set boundary, and
each |phi_j| is bounded on [0, h_max] by the extended class-K function
sign(r)|r|**d_j. Those two facts make the learned residual admissible in the
barrier condition regardless of the posterior: ``residual_bound`` returns
the class-K lower bound built from the absolute posterior weights.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import classk
from .classk import ClassKFn

__all__ = [
    "BarrierBasis",
    "GaussianPosterior",
    "standard_prior",
    "features",
    "update",
    "batch_fit",
    "predict",
    "residual_bound",
    "predicted_residual",
    "posterior_to_dict",
    "posterior_from_dict",
]

U_BOUND_SLACK = 1e-9

PREDICTIVE_VARIANCE_MODES = ("additive", "inverse")


@dataclass(frozen=True)
class BarrierBasis:
    """Monomial basis over h plus per-channel input replication.

    ``u_max`` is the sup-norm bound of the admissible input box; the residual
    bound must hold for every input the safety filter may choose, so it is
    taken from the box rather than from observed data.
    """

    degrees: tuple[int, ...]
    input_dim: int
    u_max: float

    def __post_init__(self) -> None:
        if not self.degrees:
            raise ValueError("basis needs at least one monomial degree")
        for d in self.degrees:
            if not isinstance(d, int) or d < 1:
                raise ValueError(f"monomial degrees must be integers >= 1, got {d!r}")
        if self.input_dim < 0:
            raise ValueError("input_dim must be >= 0")
        if self.u_max <= 0.0:
            raise ValueError("u_max must be positive")

    @property
    def n_functions(self) -> int:
        return len(self.degrees)

    @property
    def size(self) -> int:
        return len(self.degrees) * (self.input_dim + 1)

    def phi_values(self, h_value: float) -> np.ndarray:
        """(phi_1(h) .. phi_N(h)) for h already clamped to >= 0."""
        return np.array([h_value**d for d in self.degrees])


@dataclass(frozen=True)
class GaussianPosterior:
    """Gaussian over basis weights, maintained in both moment and precision form.

    ``precision`` is carried along so that recursive updates accumulate the
    exact same precision sum as a batch fit; the covariance is symmetrized
    after every inversion to keep it numerically symmetric positive-definite.
    """

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int = 0
    precision: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.precision is None:
            object.__setattr__(self, "precision", _symmetrize(np.linalg.inv(self.covariance)))

    @property
    def size(self) -> int:
        return self.mean.shape[0]


def _symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def standard_prior(size: int, prior_std: float = 1.0) -> GaussianPosterior:
    """Zero-mean isotropic prior; with zero mean the untrained residual is zero."""
    if prior_std <= 0.0:
        raise ValueError("prior_std must be positive")
    return GaussianPosterior(
        mean=np.zeros(size),
        covariance=prior_std**2 * np.eye(size),
        sample_count=0,
        precision=np.eye(size) / prior_std**2,
    )


def _clamped_h(h_value: float) -> float:
    if h_value < 0.0:
        warnings.warn(
            f"barrier value {h_value:.6g} below 0; clamped to 0 for feature evaluation",
            RuntimeWarning,
            stacklevel=3,
        )
        return 0.0
    return float(h_value)


def _check_u(basis: BarrierBasis, u: np.ndarray) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (basis.input_dim,):
        raise ValueError(f"expected input of shape ({basis.input_dim},), got {u.shape}")
    if np.any(np.abs(u) > basis.u_max + U_BOUND_SLACK):
        raise ValueError(f"input {u} exceeds the bound |u_i| <= {basis.u_max}")
    return u


def features(basis: BarrierBasis, h_value: float, u: np.ndarray) -> np.ndarray:
    """Feature vector of length N * (m + 1); zero whenever h <= 0."""
    u = _check_u(basis, u)
    phi = basis.phi_values(_clamped_h(h_value))
    return np.concatenate([phi] + [u_i * phi for u_i in u])


def update(
    post: GaussianPosterior, phi: np.ndarray, y: float, noise_var: float
) -> GaussianPosterior:
    """Conjugate rank-one update using the previous posterior as the prior."""
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    phi = np.asarray(phi, dtype=float)
    if not np.any(phi):
        # no information; only the sample count moves
        return replace(post, sample_count=post.sample_count + 1)
    precision_new = post.precision + np.outer(phi, phi) / noise_var
    covariance_new = _symmetrize(np.linalg.inv(precision_new))
    rhs = post.precision @ post.mean + phi * (y / noise_var)
    mean_new = covariance_new @ rhs
    return GaussianPosterior(
        mean=mean_new,
        covariance=covariance_new,
        sample_count=post.sample_count + 1,
        precision=_symmetrize(precision_new),
    )


def batch_fit(
    prior_mean: np.ndarray,
    prior_cov: np.ndarray,
    design: np.ndarray,
    targets: np.ndarray,
    noise_var: float,
) -> GaussianPosterior:
    """Posterior from a full design matrix; an empty design returns the prior."""
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    prior_mean = np.asarray(prior_mean, dtype=float)
    prior_cov = np.asarray(prior_cov, dtype=float)
    design = np.asarray(design, dtype=float).reshape(-1, prior_mean.shape[0])
    targets = np.asarray(targets, dtype=float).reshape(-1)
    if design.shape[0] != targets.shape[0]:
        raise ValueError("design and targets disagree on the number of rows")
    prior_precision = _symmetrize(np.linalg.inv(prior_cov))
    if design.shape[0] == 0:
        return GaussianPosterior(
            mean=prior_mean.copy(),
            covariance=_symmetrize(prior_cov),
            sample_count=0,
            precision=prior_precision,
        )
    precision = prior_precision + design.T @ design / noise_var
    covariance = _symmetrize(np.linalg.inv(precision))
    mean = covariance @ (prior_precision @ prior_mean + design.T @ targets / noise_var)
    return GaussianPosterior(
        mean=mean,
        covariance=covariance,
        sample_count=targets.shape[0],
        precision=_symmetrize(precision),
    )


def predict(
    post: GaussianPosterior,
    phi: np.ndarray,
    noise_var: float,
    variance_mode: str = "additive",
) -> tuple[float, float]:
    """Predictive mean and variance at a feature vector.

    ``additive`` adds the noise variance to phi' Sigma phi; ``inverse`` adds
    1/noise_var instead.
    """
    if noise_var <= 0.0:
        raise ValueError("noise_var must be positive")
    if variance_mode not in PREDICTIVE_VARIANCE_MODES:
        raise ValueError(f"variance_mode must be one of {PREDICTIVE_VARIANCE_MODES}")
    phi = np.asarray(phi, dtype=float)
    mean = float(post.mean @ phi)
    spread = float(phi @ post.covariance @ phi)
    extra = noise_var if variance_mode == "additive" else 1.0 / noise_var
    return mean, spread + extra


def residual_bound(post: GaussianPosterior, basis: BarrierBasis) -> ClassKFn:
    """Class-K lower bound on the predicted residual over h in [0, h_max].

    gamma(r) = sum_j (|w_j| + sum_i |w_{iN+j}| * u_max) * sign(r)|r|**d_j,
    so predicted_residual(...) >= -gamma(h) for every admissible input. An
    all-zero posterior mean yields the degenerate zero bound (flagged through
    ``ClassKFn.is_degenerate``).
    """
    n = basis.n_functions
    w = np.abs(post.mean)
    terms = []
    for j, degree in enumerate(basis.degrees):
        coeff = w[j] + basis.u_max * sum(w[(i + 1) * n + j] for i in range(basis.input_dim))
        shape = classk.Linear() if degree == 1 else classk.SignedPower(degree)
        terms.append((float(coeff), shape))
    return ClassKFn(tuple(terms))


def predicted_residual(
    post: GaussianPosterior, basis: BarrierBasis, h_value: float, u: np.ndarray
) -> tuple[float, np.ndarray, float]:
    """(alpha_hat, beta_hat, delta_hat) with delta_hat = alpha_hat + beta_hat . u.

    Identical to the predictive mean at features(h, u); alpha and beta are
    exposed separately because the safety filter needs the input-affine split.
    """
    u = _check_u(basis, u)
    phi = basis.phi_values(_clamped_h(h_value))
    n = basis.n_functions
    alpha_hat = float(post.mean[:n] @ phi)
    beta_hat = np.array(
        [float(post.mean[(i + 1) * n : (i + 2) * n] @ phi) for i in range(basis.input_dim)]
    )
    delta_hat = alpha_hat + float(beta_hat @ u)
    return alpha_hat, beta_hat, delta_hat


def posterior_to_dict(post: GaussianPosterior) -> dict:
    """JSON-ready snapshot for post-hoc analysis."""
    return {
        "mean": post.mean.tolist(),
        "covariance": post.covariance.tolist(),
        "sample_count": post.sample_count,
    }


def posterior_from_dict(data: dict) -> GaussianPosterior:
    return GaussianPosterior(
        mean=np.asarray(data["mean"], dtype=float),
        covariance=np.asarray(data["covariance"], dtype=float),
        sample_count=int(data["sample_count"]),
    )

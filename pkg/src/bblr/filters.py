"""Min-norm QP safety filters and the uncertainty-weighted blend.

Each filter solves

    min 0.5 * ||u - u_ref||^2   s.t.  a . u >= b,  u in the input box,

where the row (a, b) encodes one barrier condition:

  * true-oracle: the plain barrier condition on the true model (baseline
    that uses ground truth unavailable to the learner);
  * nominal: the condition on the nominal model over the shrunk barrier
    h - rho, robust to any projected disturbance bounded by rho;
  * learned: the nominal condition augmented with the regression estimate of
    the Lie-derivative residual and its class-K lower bound, which widens the
    certificate wherever the data supports it.

The blend weights the nominal and learned solutions by the predictive
uncertainty of the regression, so the filter degrades gracefully to the
nominal behavior when the local model is uninformative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import classk
from .blr import BarrierBasis, GaussianPosterior, features, predict, predicted_residual, residual_bound
from .classk import ClassKFn
from .dynamics import BarrierFunction, ControlAffineSystem, lie_derivatives

__all__ = [
    "FilterConfig",
    "FilterDecision",
    "solve_min_norm_qp",
    "true_oracle_filter",
    "nominal_filter",
    "bblr_filter",
    "blending_ratio",
    "blended_decision",
]

QP_TOL = 1e-12
QP_MAX_SWEEPS = 1000

Q_KINDS = ("identity", "square")


@dataclass(frozen=True)
class FilterConfig:
    """Shared filter parameters.

    The disturbance-margin condition rho <= -gamma(-rho) is checked at
    construction; when it fails, ``h0_shift`` holds the (negative) barrier
    shift that restores the certificate on {h + h0 >= 0}, and the filters
    evaluate their comparison-function terms at the shifted barrier value.
    """

    gamma: ClassKFn
    rho: float = 0.5
    s: int = 2
    q_kind: str = "identity"
    input_box: tuple[tuple[float, float], ...] = ((-25.0, 25.0),)
    warmup_seconds: float = 0.2
    h0_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.rho <= 0.0:
            raise ValueError("rho must be positive")
        if not isinstance(self.s, int) or self.s < 1:
            raise ValueError("s must be a positive integer")
        if self.q_kind not in Q_KINDS:
            raise ValueError(f"q_kind must be one of {Q_KINDS}")
        if self.warmup_seconds < 0.0:
            raise ValueError("warmup_seconds must be nonnegative")
        for lo, hi in self.input_box:
            if not lo < hi:
                raise ValueError(f"input box channel [{lo}, {hi}] is empty")
        condition = classk.check_rho_condition(self.gamma, self.rho)
        object.__setattr__(self, "h0_shift", 0.0 if condition.holds else float(condition.h0))

    @property
    def rho_condition_holds(self) -> bool:
        return self.h0_shift == 0.0

    @property
    def input_lo(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.input_box])

    @property
    def input_hi(self) -> np.ndarray:
        return np.array([hi for _, hi in self.input_box])

    @property
    def u_max(self) -> float:
        """Sup-norm bound of the input box, used by the basis residual bound."""
        return float(max(max(abs(lo), abs(hi)) for lo, hi in self.input_box))

    def clamp(self, u: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(u, dtype=float), self.input_lo, self.input_hi)


@dataclass(frozen=True)
class FilterDecision:
    """Filter output plus diagnostics.

    ``constraint_slack`` is a . u_star - b for the decision's own QP row
    (for a blend, the learned row). ``feasible`` is False whenever any QP
    involved had an empty feasible set, including fallbacks.
    """

    u_star: np.ndarray
    mode: str
    constraint_slack: float = 0.0
    blend_r: float = 0.0
    feasible: bool = True
    sigma_k: float = 0.0


def solve_min_norm_qp(
    u_ref: np.ndarray,
    a: np.ndarray,
    b: float,
    lo: np.ndarray,
    hi: np.ndarray,
) -> tuple[np.ndarray, bool]:
    """Minimize 0.5*||u - u_ref||^2 subject to a . u >= b and lo <= u <= hi.

    The 1-D case is solved exactly by interval intersection and clamping.
    Higher dimensions use Dykstra alternating projections onto the halfspace
    and the box (at most QP_MAX_SWEEPS sweeps). If the halfspace misses the
    box entirely, returns (box point maximizing a . u, False) as the
    best-effort safety fallback.
    """
    u_ref = np.atleast_1d(np.asarray(u_ref, dtype=float))
    a = np.atleast_1d(np.asarray(a, dtype=float))
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    m = u_ref.shape[0]

    # box vertex maximizing a . u; zero-coefficient channels take the clamped
    # reference so the fallback deviates minimally where it does not matter
    best = np.where(a > 0.0, hi, np.where(a < 0.0, lo, np.clip(u_ref, lo, hi)))
    if float(a @ best) < b:
        return best, False

    if m == 1:
        lo_eff, hi_eff = lo[0], hi[0]
        if a[0] > 0.0:
            lo_eff = max(lo_eff, b / a[0])
        elif a[0] < 0.0:
            hi_eff = min(hi_eff, b / a[0])
        # a == 0 with b <= 0 leaves the box unrestricted
        if lo_eff > hi_eff:
            return best, False
        return np.array([min(max(u_ref[0], lo_eff), hi_eff)]), True

    boxed = np.clip(u_ref, lo, hi)
    if float(a @ boxed) >= b:
        return boxed, True

    norm_sq = float(a @ a)
    x = u_ref.copy()
    p = np.zeros(m)
    q = np.zeros(m)
    for _ in range(QP_MAX_SWEEPS):
        z = x + p
        gap = b - float(a @ z)
        y = z + (gap / norm_sq) * a if gap > 0.0 else z
        p = z - y
        z = y + q
        x_new = np.clip(z, lo, hi)
        q = z - x_new
        # early sweeps can repeat x exactly while the halfspace is still
        # violated (the auxiliary corrections keep moving), so convergence
        # requires feasibility as well as a stationary iterate
        done = np.max(np.abs(x_new - x)) <= QP_TOL and float(a @ x_new) >= b - 1e-10
        x = x_new
        if done:
            break
    return x, True


def _decide(u_ref: np.ndarray, a: np.ndarray, b: float, cfg: FilterConfig, mode: str) -> FilterDecision:
    u, feasible = solve_min_norm_qp(u_ref, a, b, cfg.input_lo, cfg.input_hi)
    return FilterDecision(
        u_star=u,
        mode=mode,
        constraint_slack=float(a @ u) - b,
        blend_r=1.0 if mode == "bblr" else 0.0,
        feasible=feasible,
    )


def true_oracle_filter(
    x: np.ndarray,
    u_ref: np.ndarray,
    true_sys: ControlAffineSystem,
    bf: BarrierFunction,
    cfg: FilterConfig,
) -> FilterDecision:
    """Barrier condition on the true model: L_f h + L_g h u >= -gamma(h).

    Baseline only; the learner never has access to the true Lie derivatives.
    """
    h = bf.value(x)
    lf, lg = lie_derivatives(true_sys, bf, x)
    b = -classk.evaluate(cfg.gamma, h) - lf
    return _decide(u_ref, lg, b, cfg, "true_oracle")


def _nominal_row(
    x: np.ndarray, nominal_sys: ControlAffineSystem, bf: BarrierFunction, cfg: FilterConfig
) -> tuple[np.ndarray, float]:
    h = bf.value(x) + cfg.h0_shift
    lf, lg = lie_derivatives(nominal_sys, bf, x)
    b = -classk.evaluate(cfg.gamma, h - cfg.rho) - lf
    return lg, b


def nominal_filter(
    x: np.ndarray,
    u_ref: np.ndarray,
    nominal_sys: ControlAffineSystem,
    bf: BarrierFunction,
    cfg: FilterConfig,
) -> FilterDecision:
    """Robust condition on the nominal model over the shrunk barrier h - rho.

    Any feasible input keeps the true system safe for every projected
    disturbance bounded by rho (the gradients of h and h - rho coincide).
    """
    a, b = _nominal_row(x, nominal_sys, bf, cfg)
    return _decide(u_ref, a, b, cfg, "nominal")


def _bblr_row(
    x: np.ndarray,
    nominal_sys: ControlAffineSystem,
    bf: BarrierFunction,
    basis: BarrierBasis,
    posterior: GaussianPosterior,
    cfg: FilterConfig,
) -> tuple[np.ndarray, float]:
    h = bf.value(x)
    h_eff = h + cfg.h0_shift
    lf, lg = lie_derivatives(nominal_sys, bf, x)
    alpha_hat, beta_hat, _ = predicted_residual(
        posterior, basis, h, np.zeros(basis.input_dim)
    )
    gamma_pssf = classk.make_pssf(cfg.gamma, cfg.rho)
    gamma_dhat = residual_bound(posterior, basis)
    a = lg + beta_hat
    b = (
        -classk.evaluate(gamma_pssf, h_eff)
        - classk.evaluate(gamma_dhat, h)
        - lf
        - alpha_hat
        + cfg.rho
    )
    return a, b


def bblr_filter(
    x: np.ndarray,
    u_ref: np.ndarray,
    nominal_sys: ControlAffineSystem,
    bf: BarrierFunction,
    basis: BarrierBasis,
    posterior: GaussianPosterior,
    cfg: FilterConfig,
) -> FilterDecision:
    """Learned condition: nominal Lie derivative plus the predicted residual.

    The row is  (L_g h + beta_hat) . u  >=  -gamma_pssf(h) - gamma_dhat(h)
    - L_f h - alpha_hat + rho, which stays affine in u because the residual
    bound gamma_dhat absorbs the input through the box sup-norm.
    """
    a, b = _bblr_row(x, nominal_sys, bf, basis, posterior, cfg)
    return _decide(u_ref, a, b, cfg, "bblr")


def blending_ratio(rho: float, s: int, sigma_k: float, q_kind: str = "identity") -> float:
    """r = q(rho / (rho + s * sigma_k)); r = 1 at zero uncertainty."""
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    if sigma_k < 0.0:
        raise ValueError("sigma_k must be nonnegative")
    if q_kind not in Q_KINDS:
        raise ValueError(f"q_kind must be one of {Q_KINDS}")
    z = rho / (rho + s * sigma_k)
    return z * z if q_kind == "square" else z


def blended_decision(
    x: np.ndarray,
    u_ref: np.ndarray,
    nominal_sys: ControlAffineSystem,
    bf: BarrierFunction,
    basis: BarrierBasis,
    posterior: GaussianPosterior,
    noise_var: float,
    cfg: FilterConfig,
    t: float,
    variance_mode: str = "additive",
) -> FilterDecision:
    """Uncertainty-weighted blend of the nominal and learned filters.

    During warm-up (t < warmup_seconds) the nominal decision is returned
    unchanged. Afterwards u* = (1 - r) u_nominal + r u_learned with r from
    ``blending_ratio`` at the predictive uncertainty of the learned input.
    If one sub-QP is infeasible the other's input is used with r forced to
    0 or 1, and the event is flagged through ``feasible = False``.
    """
    if t < cfg.warmup_seconds:
        return nominal_filter(x, u_ref, nominal_sys, bf, cfg)

    d_nom = nominal_filter(x, u_ref, nominal_sys, bf, cfg)
    d_bblr = bblr_filter(x, u_ref, nominal_sys, bf, basis, posterior, cfg)

    if not d_nom.feasible or not d_bblr.feasible:
        if d_bblr.feasible:
            return replace(d_bblr, mode="blended", blend_r=1.0, feasible=False)
        if d_nom.feasible:
            return replace(d_nom, mode="blended", blend_r=0.0, feasible=False)
        return replace(d_nom, mode="blended", blend_r=0.0, feasible=False)

    h = bf.value(x)
    phi = features(basis, h, d_bblr.u_star)
    _, variance = predict(posterior, phi, noise_var, variance_mode)
    sigma_k = math.sqrt(variance)
    r = blending_ratio(cfg.rho, cfg.s, sigma_k, cfg.q_kind)
    u_star = (1.0 - r) * d_nom.u_star + r * d_bblr.u_star

    a, b = _bblr_row(x, nominal_sys, bf, basis, posterior, cfg)
    return FilterDecision(
        u_star=u_star,
        mode="blended",
        constraint_slack=float(a @ u_star) - b,
        blend_r=r,
        feasible=True,
        sigma_k=sigma_k,
    )

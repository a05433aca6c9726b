"""Control-affine dynamics, barrier functions, and Lie derivatives.

Systems are pairs of evaluators ``x_dot = f(x) + g(x) u``. The safe set is
the 0-superlevel set of a C1 barrier ``h``; all safety conditions reduce to
per-state affine inequalities on ``u`` through the Lie derivatives
``L_f h = grad_h . f`` and ``L_g h = grad_h . g``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ControlAffineSystem",
    "BarrierFunction",
    "lie_derivatives",
    "pendulum_system",
    "ellipsoid_barrier",
    "estimate_h_max",
]

# enlargement of the domain box beyond the safe-set bounding box, so states
# that barely exit the safe set remain evaluable
DOMAIN_MARGIN = 0.1

# grid density per axis used when h_max must be estimated numerically
H_MAX_GRID_DENSITY = 201


@dataclass(frozen=True)
class ControlAffineSystem:
    """Evaluators for x_dot = drift(x) + input_matrix(x) @ u.

    ``drift`` maps an (n,) state to an (n,) derivative contribution and
    ``input_matrix`` maps it to an (n, m) matrix. Instances are immutable and
    the evaluators are pure.
    """

    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_matrix: Callable[[np.ndarray], np.ndarray]

    def derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.drift(x) + self.input_matrix(x) @ u


@dataclass(frozen=True)
class BarrierFunction:
    """Barrier h with analytic gradient, codomain bound, and domain box.

    The safe set is {x : h(x) >= 0}; ``h_max`` is the maximum of h over it,
    so h maps the safe set into [0, h_max].
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    h_max: float
    domain_lo: np.ndarray
    domain_hi: np.ndarray

    def in_domain(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.domain_lo) and np.all(x <= self.domain_hi))

    def in_safe_set(self, x: np.ndarray) -> bool:
        return self.value(x) >= 0.0


def lie_derivatives(
    sys: ControlAffineSystem,
    bf: BarrierFunction,
    x: np.ndarray,
    check_domain: bool = True,
) -> tuple[float, np.ndarray]:
    """(L_f h, L_g h) at x: lf = grad_h . f(x), lg = grad_h . g(x).

    The full Lie derivative along u is lf + lg @ u. The shifted barrier
    h - rho has the same gradient, so these values serve its conditions too.
    """
    x = np.asarray(x, dtype=float)
    if check_domain and not bf.in_domain(x):
        raise ValueError(f"state {x} outside the barrier domain box")
    grad = bf.gradient(x)
    lf = float(grad @ sys.drift(x))
    lg = np.asarray(grad @ sys.input_matrix(x), dtype=float).reshape(sys.input_dim)
    return lf, lg


def pendulum_system(length_m: float, mass_kg: float, gravity: float = 9.81) -> ControlAffineSystem:
    """Torque-actuated pendulum with angle measured from the downward position.

    State (theta, theta_dot); dynamics
    theta_ddot = -(gravity / length) * sin(theta) + u / (mass * length**2).
    """
    if length_m <= 0.0 or mass_kg <= 0.0:
        raise ValueError(f"length and mass must be positive, got {length_m!r}, {mass_kg!r}")
    g_over_l = gravity / length_m
    inv_inertia = 1.0 / (mass_kg * length_m**2)

    def drift(x: np.ndarray) -> np.ndarray:
        return np.array([x[1], -g_over_l * np.sin(x[0])])

    def input_matrix(x: np.ndarray) -> np.ndarray:
        return np.array([[0.0], [inv_inertia]])

    return ControlAffineSystem(state_dim=2, input_dim=1, drift=drift, input_matrix=input_matrix)


def ellipsoid_barrier(theta_max: float, thetadot_max: float) -> BarrierFunction:
    """h(theta, theta_dot) = 1 - (theta/theta_max)**2 - (theta_dot/thetadot_max)**2.

    The safe set is the ellipse with those semi-axes; h_max = 1 at the origin.
    The domain box is the ellipse's bounding box enlarged by DOMAIN_MARGIN.
    """
    if theta_max <= 0.0 or thetadot_max <= 0.0:
        raise ValueError("barrier semi-axes must be positive")

    def value(x: np.ndarray) -> float:
        return float(1.0 - (x[0] / theta_max) ** 2 - (x[1] / thetadot_max) ** 2)

    def gradient(x: np.ndarray) -> np.ndarray:
        return np.array([-2.0 * x[0] / theta_max**2, -2.0 * x[1] / thetadot_max**2])

    scalebox = (1.0 + DOMAIN_MARGIN) * np.array([theta_max, thetadot_max])
    return BarrierFunction(
        value=value,
        gradient=gradient,
        h_max=1.0,
        domain_lo=-scalebox,
        domain_hi=scalebox,
    )


def estimate_h_max(
    value: Callable[[np.ndarray], float],
    domain_lo: np.ndarray,
    domain_hi: np.ndarray,
    density: int = H_MAX_GRID_DENSITY,
) -> float:
    """Grid estimate of max h over the safe set, for user-supplied barriers.

    Samples ``density`` points per axis over the domain box. Downstream uses
    only need the codomain [0, h_max] to be compact, not h_max to be exact.
    """
    axes = [np.linspace(lo, hi, density) for lo, hi in zip(domain_lo, domain_hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    best = max(value(p) for p in points)
    return float(max(best, 0.0))

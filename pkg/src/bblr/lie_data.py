"""Sliding sample window and forward-difference regression targets.

The learner never sees the true dynamics; it sees the barrier value along the
trajectory. The time derivative of h is estimated by the forward difference
(h_{t+1} - h_t) / dt, and the regression target is that estimate minus the
nominal-model Lie derivative, i.e. the Lie-derivative residual plus a
differentiation error bounded by sigma_diff = c * dt / 2 where c bounds
|d^2 h / dt^2| along the trajectory.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .blr import BarrierBasis, features
from .dynamics import BarrierFunction, ControlAffineSystem, lie_derivatives

__all__ = [
    "LearningConfig",
    "Sample",
    "SampleWindow",
    "build_regression_set",
    "sigma_diff",
]


@dataclass(frozen=True)
class LearningConfig:
    """Knobs of the online regression pipeline.

    ``curvature_bound`` is the conservative bound c on |d^2 h / dt^2| used
    for the differentiation-error scale; the regression noise variance is
    sigma_diff(c, dt)**2.
    """

    window_seconds: float = 0.2
    curvature_bound: float = 50.0
    prior_std: float = 1.0
    predictive_variance_mode: str = "additive"

    def __post_init__(self) -> None:
        if self.window_seconds <= 0.0:
            raise ValueError("window_seconds must be positive")
        if self.curvature_bound <= 0.0:
            raise ValueError("curvature_bound must be positive")
        if self.prior_std <= 0.0:
            raise ValueError("prior_std must be positive")

    def window_steps(self, dt: float) -> int:
        """Number of past intervals kept at control period dt."""
        return max(int(round(self.window_seconds / dt)), 1)


class Sample(NamedTuple):
    x: np.ndarray
    u: np.ndarray
    h: float
    t_index: int


class SampleWindow:
    """Contiguous window of the last ``capacity`` steps (capacity + 1 states).

    Owned by the simulation loop; single writer, no concurrent access.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("window capacity must be >= 1")
        self.capacity = capacity
        self._entries: deque[Sample] = deque(maxlen=capacity + 1)

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> tuple[Sample, ...]:
        return tuple(self._entries)

    def push(self, x: np.ndarray, u: np.ndarray, h: float, t_index: int) -> None:
        """Append a sample; evicts the oldest beyond capacity. Gaps are rejected."""
        if self._entries and t_index != self._entries[-1].t_index + 1:
            raise ValueError(
                f"non-contiguous sample index {t_index} after {self._entries[-1].t_index}"
            )
        self._entries.append(
            Sample(np.asarray(x, dtype=float).copy(), np.asarray(u, dtype=float).copy(), float(h), t_index)
        )

    def tail(self, n: int) -> "SampleWindow":
        """New window holding only the most recent n samples."""
        sub = SampleWindow(capacity=max(n - 1, 1))
        for entry in self.entries[-n:]:
            sub._entries.append(entry)
        return sub


def build_regression_set(
    window: SampleWindow,
    nominal: ControlAffineSystem,
    bf: BarrierFunction,
    basis: BarrierBasis,
    dt: float,
) -> list[tuple[np.ndarray, float]]:
    """One (features, target) pair per interval in the window.

    For each consecutive pair (t, t+1): the target is the forward-difference
    estimate (h_{t+1} - h_t)/dt minus the nominal Lie derivative at (x_t, u_t),
    and the features are evaluated at (h_t, u_t).
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    entries = window.entries
    if len(entries) < 2:
        raise ValueError("regression needs at least two samples in the window")
    pairs = []
    for prev, nxt in zip(entries[:-1], entries[1:]):
        fd = (nxt.h - prev.h) / dt
        lf, lg = lie_derivatives(nominal, bf, prev.x)
        y = fd - (lf + float(lg @ prev.u))
        phi = features(basis, prev.h, prev.u)
        pairs.append((phi, y))
    return pairs


def sigma_diff(c: float, dt: float) -> float:
    """Forward-difference error scale c * dt / 2."""
    if c <= 0.0 or dt <= 0.0:
        raise ValueError("c and dt must be positive")
    return 0.5 * c * dt

"""Figure rendering for experiment reports.

Renders the three standard views of a run to PNG files next to the
delimited output: the phase portrait against the safe-set ellipse, the
barrier value over time, and the true-system Lie derivative against the
barrier value. Rendering is file-only (Agg backend, no display).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .sim import Trajectory

__all__ = ["safe_set_ellipse", "render_figures"]

ELLIPSE_POINTS = 360

MODE_COLORS = {
    "unfiltered": "tab:red",
    "true_oracle": "tab:green",
    "nominal": "tab:orange",
    "bblr": "tab:blue",
}


def safe_set_ellipse(theta_max: float, thetadot_max: float, n: int = ELLIPSE_POINTS) -> np.ndarray:
    """(n, 2) boundary samples of the ellipse h = 0."""
    ang = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return np.column_stack([theta_max * np.cos(ang), thetadot_max * np.sin(ang)])


def _color(mode: str) -> str:
    return MODE_COLORS.get(mode, "tab:gray")


def render_figures(
    trajectories: dict[str, Trajectory],
    theta_max: float,
    thetadot_max: float,
    rho: float,
    out_dir: Path | str,
) -> list[Path]:
    """Write phase_plot.png, barrier_timeseries.png, lie_derivative.png."""
    out_dir = Path(out_dir)
    written = []

    # phase portrait with the safe-set boundary and the shrunk set h = rho
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    boundary = safe_set_ellipse(theta_max, thetadot_max)
    closed = np.vstack([boundary, boundary[:1]])
    ax.plot(closed[:, 0], closed[:, 1], "k-", lw=1.2, label="safe set boundary")
    if 0.0 < rho < 1.0:
        shrink = np.sqrt(1.0 - rho)
        ax.plot(shrink * closed[:, 0], shrink * closed[:, 1], "k--", lw=0.8, label=f"h = {rho:g}")
    for mode, tr in trajectories.items():
        ax.plot(tr.states[:, 0], tr.states[:, 1], color=_color(mode), lw=1.0, label=mode)
        ax.plot(tr.states[0, 0], tr.states[0, 1], marker="o", color=_color(mode), ms=3)
    ax.set_xlabel(r"$\theta$ [rad]")
    ax.set_ylabel(r"$\dot\theta$ [rad/s]")
    ax.legend(fontsize=7, loc="lower left")
    fig.tight_layout()
    path = out_dir / "phase_plot.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # barrier value over time
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for mode, tr in trajectories.items():
        ax.plot(tr.t, tr.h, color=_color(mode), lw=1.0, label=mode)
    ax.axhline(0.0, color="k", lw=1.0)
    ax.axhline(rho, color="k", lw=0.8, ls="--")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("h(x)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out_dir / "barrier_timeseries.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    # true-system Lie derivative vs barrier value; nonnegative near h = 0
    # is the boundary-invariance signature
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    for mode, tr in trajectories.items():
        ax.plot(tr.h, tr.lie_true, color=_color(mode), lw=0.8, alpha=0.85, label=mode)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.axvline(0.0, color="k", lw=0.8)
    ax.set_xlabel("h(x)")
    ax.set_ylabel(r"$\dot h$ (true system)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out_dir / "lie_derivative.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written

"""Experiment configuration: YAML schema, defaults, validation, builders.

One config file holds every experiment parameter exactly once. ``defaults``
reproduces the pendulum benchmark; ``load_config`` parses and validates a
user file; the ``build_*`` helpers turn a config into the domain objects the
simulator consumes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from . import classk
from .blr import PREDICTIVE_VARIANCE_MODES, BarrierBasis
from .classk import ClassKFn
from .dynamics import BarrierFunction, ControlAffineSystem, ellipsoid_barrier, pendulum_system
from .filters import FilterConfig
from .lie_data import LearningConfig
from .sim import MODES, SimConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "default_config",
    "load_config",
    "parse_config",
    "config_to_dict",
    "config_to_yaml",
    "validation_report",
]


class ConfigError(ValueError):
    """Config file missing, unparseable, or semantically invalid."""


@dataclass(frozen=True)
class ExperimentConfig:
    # system
    gravity: float = 9.81
    length: float = 1.0
    true_mass: float = 1.0
    nominal_mass: float = 0.96
    # barrier
    theta_max: float = 3.141592653589793
    thetadot_max: float = 5.0
    # basis
    degrees: tuple[int, ...] = (1, 2, 3, 4, 5)
    # comparison function
    gamma: ClassKFn = field(default_factory=lambda: classk.linear(1.0))
    # filter
    rho: float = 0.5
    s: int = 2
    q_kind: str = "identity"
    input_box: tuple[tuple[float, float], ...] = ((-25.0, 25.0),)
    warmup_seconds: float = 0.2
    # learning
    window_seconds: float = 0.2
    curvature_bound: float = 50.0
    prior_std: float = 2.5
    predictive_variance_mode: str = "additive"
    # simulation
    dt_control: float = 0.0025
    substeps: int = 10
    duration: float = 6.0
    initial_state: tuple[float, float] = (0.0, 0.0)
    modes: tuple[str, ...] = MODES

    # builders ---------------------------------------------------------

    def build_true_system(self) -> ControlAffineSystem:
        return pendulum_system(self.length, self.true_mass, self.gravity)

    def build_nominal_system(self) -> ControlAffineSystem:
        return pendulum_system(self.length, self.nominal_mass, self.gravity)

    def build_barrier(self) -> BarrierFunction:
        return ellipsoid_barrier(self.theta_max, self.thetadot_max)

    def build_filter_config(self) -> FilterConfig:
        return FilterConfig(
            gamma=self.gamma,
            rho=self.rho,
            s=self.s,
            q_kind=self.q_kind,
            input_box=self.input_box,
            warmup_seconds=self.warmup_seconds,
        )

    def build_basis(self) -> BarrierBasis:
        return BarrierBasis(
            degrees=self.degrees,
            input_dim=1,
            u_max=self.build_filter_config().u_max,
        )

    def build_learning_config(self) -> LearningConfig:
        return LearningConfig(
            window_seconds=self.window_seconds,
            curvature_bound=self.curvature_bound,
            prior_std=self.prior_std,
            predictive_variance_mode=self.predictive_variance_mode,
        )

    def build_sim_config(self, mode: str, duration: float | None = None) -> SimConfig:
        return SimConfig(
            dt_control=self.dt_control,
            substeps=self.substeps,
            duration=self.duration if duration is None else duration,
            initial_state=self.initial_state,
            mode=mode,
        )


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def config_to_dict(cfg: ExperimentConfig) -> dict:
    return {
        "system": {
            "gravity": cfg.gravity,
            "length": cfg.length,
            "true_mass": cfg.true_mass,
            "nominal_mass": cfg.nominal_mass,
        },
        "barrier": {"theta_max": cfg.theta_max, "thetadot_max": cfg.thetadot_max},
        "basis": {"degrees": list(cfg.degrees)},
        "gamma": classk.to_records(cfg.gamma),
        "filter": {
            "rho": cfg.rho,
            "s": cfg.s,
            "q_kind": cfg.q_kind,
            "input_box": [list(pair) for pair in cfg.input_box],
            "warmup_seconds": cfg.warmup_seconds,
        },
        "learning": {
            "window_seconds": cfg.window_seconds,
            "curvature_bound": cfg.curvature_bound,
            "prior_std": cfg.prior_std,
            "predictive_variance_mode": cfg.predictive_variance_mode,
        },
        "sim": {
            "dt_control": cfg.dt_control,
            "substeps": cfg.substeps,
            "duration": cfg.duration,
            "initial_state": list(cfg.initial_state),
        },
        "modes": list(cfg.modes),
    }


def config_to_yaml(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)


_SECTION_KEYS = {
    "system": ("gravity", "length", "true_mass", "nominal_mass"),
    "barrier": ("theta_max", "thetadot_max"),
    "basis": ("degrees",),
    "filter": ("rho", "s", "q_kind", "input_box", "warmup_seconds"),
    "learning": (
        "window_seconds",
        "curvature_bound",
        "prior_std",
        "predictive_variance_mode",
    ),
    "sim": ("dt_control", "substeps", "duration", "initial_state"),
}


def _parse_input_box(raw) -> tuple[tuple[float, float], ...]:
    if not isinstance(raw, (list, tuple)) or not raw:
        raise ConfigError(f"input_box must be [lo, hi] or a list of such pairs, got {raw!r}")
    if all(isinstance(v, (int, float)) for v in raw):
        if len(raw) != 2:
            raise ConfigError(f"input_box must have exactly [lo, hi], got {raw!r}")
        return ((float(raw[0]), float(raw[1])),)
    box = []
    for pair in raw:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise ConfigError(f"input_box channel must be [lo, hi], got {pair!r}")
        box.append((float(pair[0]), float(pair[1])))
    return tuple(box)


def parse_config(data: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a parsed mapping; unknown keys fail."""
    if not isinstance(data, dict):
        raise ConfigError(f"config root must be a mapping, got {type(data).__name__}")
    unknown = set(data) - set(_SECTION_KEYS) - {"gamma", "modes"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")

    kwargs = {}
    for section, keys in _SECTION_KEYS.items():
        block = data.get(section, {})
        if not isinstance(block, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        extra = set(block) - set(keys)
        if extra:
            raise ConfigError(f"unknown keys in {section!r}: {sorted(extra)}")
        kwargs.update(block)

    if "degrees" in kwargs:
        try:
            kwargs["degrees"] = tuple(int(d) for d in kwargs["degrees"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"basis degrees must be integers: {exc}") from exc
    if "input_box" in kwargs:
        kwargs["input_box"] = _parse_input_box(kwargs["input_box"])
    if "initial_state" in kwargs:
        state = kwargs["initial_state"]
        if not isinstance(state, (list, tuple)) or len(state) != 2:
            raise ConfigError(f"initial_state must be [theta, thetadot], got {state!r}")
        kwargs["initial_state"] = (float(state[0]), float(state[1]))
    if "s" in kwargs:
        kwargs["s"] = int(kwargs["s"])
    if "substeps" in kwargs:
        kwargs["substeps"] = int(kwargs["substeps"])

    if "gamma" in data:
        try:
            kwargs["gamma"] = classk.from_records(data["gamma"])
        except ValueError as exc:
            raise ConfigError(f"invalid gamma specification: {exc}") from exc
    if "modes" in data:
        modes = data["modes"]
        if not isinstance(modes, (list, tuple)):
            raise ConfigError(f"modes must be a list, got {modes!r}")
        kwargs["modes"] = tuple(modes)

    try:
        cfg = ExperimentConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    if not cfg.modes:
        raise ConfigError("mode list must be nonempty")
    if len(set(cfg.modes)) != len(cfg.modes):
        raise ConfigError(f"duplicate modes in {cfg.modes}")
    for mode in cfg.modes:
        if mode not in MODES:
            raise ConfigError(f"unknown mode {mode!r}; valid modes are {MODES}")
    for d in cfg.degrees:
        if d < 1:
            raise ConfigError(
                f"basis degree {d} rejected: degree 0 would not vanish at the barrier boundary"
            )
    if cfg.window_seconds < 2.0 * cfg.dt_control:
        raise ConfigError(
            f"window_seconds={cfg.window_seconds} must be >= 2 * dt_control={cfg.dt_control}"
        )
    if cfg.predictive_variance_mode not in PREDICTIVE_VARIANCE_MODES:
        raise ConfigError(
            f"predictive_variance_mode must be one of {PREDICTIVE_VARIANCE_MODES}"
        )
    # constructors enforce the remaining domain constraints
    try:
        cfg.build_true_system()
        cfg.build_nominal_system()
        cfg.build_barrier()
        cfg.build_filter_config()
        cfg.build_basis()
        cfg.build_learning_config()
        cfg.build_sim_config(cfg.modes[0])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Path | str) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        # YAML errors carry line/column context in their message
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if data is None:
        raise ConfigError(f"config {path} is empty")
    return parse_config(data)


def validation_report(cfg: ExperimentConfig) -> list[tuple[str, bool, str]]:
    """(check, passed, detail) rows for the ``validate`` subcommand.

    A failed disturbance-margin check is reported with the barrier shift h0
    that the filters will apply; it is a warning, not an error.
    """
    rows: list[tuple[str, bool, str]] = []
    condition = classk.check_rho_condition(cfg.gamma, cfg.rho)
    if condition.holds:
        neg = -classk.evaluate(cfg.gamma, -cfg.rho)
        rows.append(
            ("rho_condition", True, f"rho={cfg.rho} <= -gamma(-rho)={neg:.6g}")
        )
    else:
        rows.append(
            (
                "rho_condition",
                False,
                f"fails; certified set shrinks to {{h + h0 >= 0}} with h0={condition.h0:.5f}",
            )
        )
    rows.append(
        (
            "basis_degrees",
            all(d >= 1 for d in cfg.degrees),
            f"degrees={list(cfg.degrees)} all >= 1",
        )
    )
    rows.append(
        (
            "window_length",
            cfg.window_seconds >= 2.0 * cfg.dt_control,
            f"window_seconds={cfg.window_seconds} >= 2*dt_control={2.0 * cfg.dt_control}",
        )
    )
    rows.append(
        (
            "modes",
            bool(cfg.modes) and len(set(cfg.modes)) == len(cfg.modes),
            f"modes={list(cfg.modes)}",
        )
    )
    return rows

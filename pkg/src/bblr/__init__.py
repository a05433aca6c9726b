"""Safe-learning control barrier filters with online Bayesian linear regression.

The library augments an arbitrary state-feedback controller with min-norm QP
safety filters whose barrier condition is learned online. The learned
condition is lower-bounded by a negative extended class-K-infinity function
by construction, so the filter stays admissible throughout learning.
"""

from .blr import BarrierBasis, GaussianPosterior
from .classk import ClassKFn
from .config import ExperimentConfig, default_config, load_config
from .dynamics import BarrierFunction, ControlAffineSystem, ellipsoid_barrier, pendulum_system
from .filters import FilterConfig, FilterDecision
from .lie_data import LearningConfig, SampleWindow
from .sim import SimConfig, Trajectory, run_closed_loop, swingup_controller

__version__ = "0.1.0"

__all__ = [
    "BarrierBasis",
    "BarrierFunction",
    "ClassKFn",
    "ControlAffineSystem",
    "ExperimentConfig",
    "FilterConfig",
    "FilterDecision",
    "GaussianPosterior",
    "LearningConfig",
    "SampleWindow",
    "SimConfig",
    "Trajectory",
    "default_config",
    "ellipsoid_barrier",
    "load_config",
    "pendulum_system",
    "run_closed_loop",
    "swingup_controller",
    "__version__",
]

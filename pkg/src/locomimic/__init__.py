"""Dynamically consistent reference motions for quadruped locomotion."""

from .errors import (ConfigError, FlightPhaseError, InvalidInputError, InvalidParameterError, LayoutError,
                     LocomimicError, OutOfBoundsError, SingularityError)
from .gait import BUILTIN_GAITS, GaitPattern, make_timeline
from .ocp import OcpProblem, OcpWeights, SolverSettings, make_problem, solve_ocp
from .synthesis import MotionQueue, ReferenceFrame, ReferenceGenerator, generate_reference, kinematic_baseline
from .vhipm import ControlInput, PendulumState

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_GAITS", "ConfigError", "ControlInput", "FlightPhaseError", "GaitPattern", "InvalidInputError",
    "InvalidParameterError", "LayoutError", "LocomimicError", "MotionQueue", "OcpProblem", "OcpWeights",
    "OutOfBoundsError", "PendulumState", "ReferenceFrame", "ReferenceGenerator", "SingularityError",
    "SolverSettings", "generate_reference", "kinematic_baseline", "make_problem", "make_timeline", "solve_ocp",
]

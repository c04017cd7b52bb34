"""Lunar descent and landing guidance toolkit."""

from .braking import BilinearLaw, BrakingTarget, solve_braking_5, solve_braking_6
from .config import MissionConfig, MissionDesign, load_config, load_design
from .dynamics import EngineModel
from .mission import assemble, divert_matrix, replay_closed_loop
from .moon import MOON, MoonConstants, SphericalState

__all__ = [
    "MOON",
    "BilinearLaw",
    "BrakingTarget",
    "EngineModel",
    "MissionConfig",
    "MissionDesign",
    "MoonConstants",
    "SphericalState",
    "assemble",
    "divert_matrix",
    "load_config",
    "load_design",
    "replay_closed_loop",
    "solve_braking_5",
    "solve_braking_6",
]

__version__ = "0.1.0"

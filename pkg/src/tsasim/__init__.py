"""Simulation and analysis of a twisted-string-actuated soft gripper."""

from .config import GripperConfig, default_config, load_config
from .finger import FingerParams, NonConvergence, Orientation
from .tsa_core import TsaParams

__all__ = [
    "FingerParams",
    "GripperConfig",
    "NonConvergence",
    "Orientation",
    "TsaParams",
    "default_config",
    "load_config",
]

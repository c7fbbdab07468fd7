"""Two-actuator thumb: a bending chain plus a roll joint.

Motor #1 drives the bending chain (same pseudo-joint finger as the others),
Motor #2 drives the roll joint. The three measured Euler angles are a
constant linear mix of (bend angle, roll angle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .finger import FingerParams, FingerState, Orientation, driven_equilibrium
from .tsa_core import TsaParams, contraction

DEFAULT_COUPLING = (
    (1.00, 0.30),  # alpha_x <- (bend, roll)
    (0.15, 0.90),  # alpha_y
    (0.10, 0.35),  # alpha_z
)

# direction in the base frame along which gravity loads the roll joint
_ROLL_GRAVITY_AXIS = (0.6, 0.8)


def _check_coupling(c: np.ndarray) -> None:
    if c.shape != (3, 2):
        raise ValueError(f"coupling must be 3x2, got {c.shape}")
    bend, roll = np.abs(c[:, 0]), np.abs(c[:, 1])
    if not (bend[0] > bend[1] and bend[0] > bend[2]):
        raise ValueError("coupling bend column must be x-dominant")
    if not (roll[1] > roll[0] and roll[1] > roll[2]):
        raise ValueError("coupling roll column must be y-dominant")
    if roll[0] == 0 or roll[2] == 0:
        raise ValueError("coupling roll column needs nonzero x and z entries")


@dataclass(frozen=True)
class ThumbParams:
    finger_params: FingerParams = field(default_factory=FingerParams)
    bend_tsa: TsaParams = field(default_factory=lambda: TsaParams(slack=3.0))
    roll_tsa: TsaParams = field(default_factory=lambda: TsaParams(slack=0.5))
    roll_max_angle: float = 90.0  # deg
    roll_moment_arm: float = 8.0  # mm
    roll_stiffness: float = 40.0  # N*mm/rad
    # roll joint carries the whole thumb, so gravity loads it much harder
    roll_gravity_torque: float = 12.0  # N*mm at unit projection
    coupling: tuple = DEFAULT_COUPLING
    check_dominance: bool = True

    def __post_init__(self):
        c = np.asarray(self.coupling, dtype=float)
        if self.check_dominance:
            _check_coupling(c)
        elif c.shape != (3, 2):
            raise ValueError(f"coupling must be 3x2, got {c.shape}")
        object.__setattr__(self, "coupling", tuple(tuple(float(v) for v in row) for row in c))
        if self.roll_max_angle != 90.0:
            raise ValueError("roll_max_angle is fixed at 90 deg")
        if self.roll_moment_arm <= 0 or self.roll_stiffness <= 0 or self.roll_gravity_torque < 0:
            raise ValueError("roll joint parameters must be positive")


@dataclass(frozen=True)
class ThumbPose:
    euler: tuple  # (alpha_x, alpha_y, alpha_z) deg
    bend_angle: float = 0.0
    roll_angle: float = 0.0


def roll_angle(params: ThumbParams, roll_twist: float, orientation: Orientation | str) -> float:
    """Roll joint angle (deg) in [0, 90] for a given roll-motor twist."""
    orientation = Orientation.parse(orientation)
    gx, gy = orientation.gravity_direction
    g_proj = _ROLL_GRAVITY_AXIS[0] * gx + _ROLL_GRAVITY_AXIS[1] * gy
    tsa = params.roll_tsa
    pull = contraction(tsa, abs(roll_twist)) - tsa.slack
    arm = params.roll_moment_arm

    def torque(rho):
        tension = tsa.axial_stiffness * max(0.0, pull - arm * rho)
        return tension * arm - params.roll_stiffness * rho + params.roll_gravity_torque * g_proj * math.cos(rho)

    hi = math.radians(params.roll_max_angle)
    if torque(0.0) <= 0.0:
        return 0.0
    if torque(hi) >= 0.0:
        return params.roll_max_angle
    return math.degrees(brentq(torque, 0.0, hi, xtol=1e-12))


def bend_state(params: ThumbParams, bend_twist: float, orientation: Orientation | str) -> FingerState:
    state, _ = driven_equilibrium(params.finger_params, params.bend_tsa, abs(bend_twist), 0.0,
                                  orientation)
    return state


def thumb_pose(params: ThumbParams, bend_motor_twist: float, roll_motor_twist: float,
               orientation: Orientation | str) -> ThumbPose:
    bend = bend_state(params, bend_motor_twist, orientation).fingertip_angle
    roll = roll_angle(params, roll_motor_twist, orientation)
    euler = np.asarray(params.coupling) @ np.array([bend, roll])
    return ThumbPose(tuple(float(e) for e in euler), bend, roll)

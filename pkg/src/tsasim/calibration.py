"""Scalar searches that tune the default finger to the headline measurements.

Two targets are supported: the fingertip angle at motor stall (tuned through
the twisting-zone length of the primary TSAs, falling back to a joint
stiffness scale) and the blocked fingertip force (tuned through a common
scale on the frontal moment arms). Both searches are
bracketed and solved with Brent's method; they are alternated until both
targets sit inside their tolerances at once.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .config import FINGER_NAMES, GripperConfig
from .experiments import blocked_force, max_bend

TARGETS = {"max_bend": 230.6, "blocked_force": 6.8}
TOLERANCES = {"max_bend": 0.05, "blocked_force": 0.15}  # relative
LENGTH_BOUNDS = (0.85, 1.2)  # x current twisting-zone length
ARM_BOUNDS = (0.8, 1.25)  # x current frontal moment arms
STIFFNESS_BOUNDS = (0.5, 2.0)  # x current joint stiffness


class CalibrationError(RuntimeError):
    """A target cannot be met within the parameter bounds."""


@dataclass(frozen=True)
class CalibrationResult:
    config: GripperConfig
    values: dict  # target name -> achieved value
    changed: bool
    notes: tuple = ()


def measure(config: GripperConfig, name: str) -> float:
    if name == "max_bend":
        return max_bend(config)[0]
    if name == "blocked_force":
        return blocked_force(config)
    raise ValueError(f"unknown calibration target {name!r}; choose from {', '.join(TARGETS)}")


def within(name: str, value: float, target: float) -> bool:
    return abs(value - target) <= TOLERANCES[name] * abs(target)


def scale_twist_zone(config: GripperConfig, factor: float) -> GripperConfig:
    for i in range(len(FINGER_NAMES)):
        name = f"finger{i}_primary"
        tsa = config.actuators[name]
        config = config.replace_actuator(name, dataclasses.replace(
            tsa, twist_zone_length=tsa.twist_zone_length * factor, max_twist=None))
    return config


def scale_moment_arms(config: GripperConfig, factor: float) -> GripperConfig:
    for i, finger in enumerate(config.fingers):
        arms = tuple(a * factor for a in finger.frontal_moment_arm)
        config = config.replace_finger(i, dataclasses.replace(finger, frontal_moment_arm=arms))
    return config


def scale_joint_stiffness(config: GripperConfig, factor: float) -> GripperConfig:
    for i, finger in enumerate(config.fingers):
        k = tuple(v * factor for v in finger.joint_stiffness)
        config = config.replace_finger(i, dataclasses.replace(finger, joint_stiffness=k))
    return config


def _solve_scale(config, name, target, scaler, bounds, grid=13):
    """Bracket the target along the scale factor and refine with Brent's method.

    Without a sign change (the response can peak inside the bounds) the grid
    point closest to the target is used if it lies within tolerance.
    """
    def f(s):
        return measure(scaler(config, s), name) - target

    xs = np.linspace(bounds[0], bounds[1], grid)
    # search outward from 1 so the nearest solution wins
    xs = xs[np.argsort(np.abs(xs - 1.0))]
    f1 = f(1.0)
    if f1 == 0.0:
        return 1.0
    closest = (abs(f1), 1.0)
    for x in xs:
        if x == 1.0:
            continue
        fx = f(x)
        closest = min(closest, (abs(fx), float(x)))
        if np.sign(fx) != np.sign(f1):
            lo, hi = sorted((1.0, x))
            return brentq(f, lo, hi, xtol=1e-6)
    if closest[0] <= TOLERANCES[name] * abs(target):
        return closest[1]
    raise CalibrationError(f"{name} target {target} not reachable with scale factors in {bounds}")


def calibrate(config: GripperConfig, targets: dict, max_rounds: int = 6) -> CalibrationResult:
    """Adjust free parameters until every target is within tolerance.

    Already-satisfied targets leave the config untouched.
    """
    for name in targets:
        if name not in TARGETS:
            raise ValueError(f"unknown calibration target {name!r}; choose from {', '.join(TARGETS)}")
    values = {n: measure(config, n) for n in targets}
    if all(within(n, values[n], t) for n, t in targets.items()):
        return CalibrationResult(config, values, False)
    notes = []
    current = config
    for _ in range(max_rounds):
        if "blocked_force" in targets and not within("blocked_force", values["blocked_force"],
                                                     targets["blocked_force"]):
            s = _solve_scale(current, "blocked_force", targets["blocked_force"],
                             scale_moment_arms, ARM_BOUNDS)
            current = scale_moment_arms(current, s)
            notes.append(f"frontal moment arms x{s:.6g}")
        values = {n: measure(current, n) for n in targets}
        if "max_bend" in targets and not within("max_bend", values["max_bend"], targets["max_bend"]):
            try:
                s = _solve_scale(current, "max_bend", targets["max_bend"], scale_twist_zone,
                                 LENGTH_BOUNDS)
                current = scale_twist_zone(current, s)
                notes.append(f"twisting-zone length x{s:.6g}")
            except CalibrationError:
                # twisting-zone length alone cannot reach it; soften or stiffen the joints
                s = _solve_scale(current, "max_bend", targets["max_bend"], scale_joint_stiffness,
                                 STIFFNESS_BOUNDS)
                current = scale_joint_stiffness(current, s)
                notes.append(f"joint stiffness x{s:.6g}")
        values = {n: measure(current, n) for n in targets}
        if all(within(n, values[n], t) for n, t in targets.items()):
            return CalibrationResult(current, values, True, tuple(notes))
    raise CalibrationError(
        "targets not met after alternating searches: "
        + ", ".join(f"{n}={values[n]:.4g} (target {t})" for n, t in targets.items())
    )

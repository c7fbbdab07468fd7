"""Kinematics and statics of a two-string twisted string actuator (TSA).

The strings are twisted inside a fixed twisting zone of length ``L`` bounded
by the motor and the sorter. With string radius ``r`` and ``theta`` motor
rotations the helix model gives

    x(theta) = L - sqrt(L**2 - (2*pi*theta*r)**2)

for the linear contraction. Everything here is a pure function of an
immutable :class:`TsaParams`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

TWO_PI = 2.0 * math.pi

# 0.45 kg*cm expressed in N*mm
STALL_TORQUE_NMM = 0.45 * 9.80665 * 10.0


class TsaDomainError(ValueError):
    """Twist outside ``[0, max_twist]`` or invalid actuator parameters."""


def singularity_twist(twist_zone_length: float, string_radius: float) -> float:
    """Twist (rotations) at which the helix model reaches full contraction."""
    return twist_zone_length / (TWO_PI * string_radius)


@dataclass(frozen=True)
class TsaParams:
    twist_zone_length: float = 69.0  # mm
    string_radius: float = 0.35  # mm, 0.7 mm UHMWPE string
    max_twist: float | None = None  # rotations; None -> 0.95 * singularity
    jacobian_floor: float = 0.05  # mm/rot
    # Slack taken up before the string path carries load (mm).
    slack: float = 0.0
    # Series stiffness of the loaded string path (string + silicone axial
    # compression), N/mm.
    axial_stiffness: float = 25.0
    max_twist_fraction: float = field(default=0.95, repr=False)

    def __post_init__(self):
        if not self.twist_zone_length > 0:
            raise TsaDomainError(f"twist_zone_length must be > 0, got {self.twist_zone_length}")
        if not self.string_radius > 0:
            raise TsaDomainError(f"string_radius must be > 0, got {self.string_radius}")
        if not self.jacobian_floor > 0:
            raise TsaDomainError(f"jacobian_floor must be > 0, got {self.jacobian_floor}")
        if self.slack < 0:
            raise TsaDomainError(f"slack must be >= 0, got {self.slack}")
        if not self.axial_stiffness > 0:
            raise TsaDomainError(f"axial_stiffness must be > 0, got {self.axial_stiffness}")
        sing = singularity_twist(self.twist_zone_length, self.string_radius)
        if self.max_twist is None:
            object.__setattr__(self, "max_twist", self.max_twist_fraction * sing)
        if not 0 < self.max_twist < sing:
            raise TsaDomainError(
                f"max_twist must lie in (0, {sing:.6g}) rotations, got {self.max_twist}"
            )

    @property
    def singularity(self) -> float:
        return singularity_twist(self.twist_zone_length, self.string_radius)


@dataclass(frozen=True)
class TsaState:
    """Twist, contraction and tension of one string pair.

    ``contraction`` is derived from the twist; build instances with
    :meth:`at` rather than setting it by hand.
    """

    twist: float
    contraction: float
    tension: float

    @classmethod
    def at(cls, params: TsaParams, twist: float, tension: float = 0.0) -> "TsaState":
        if tension < 0:
            raise TsaDomainError(f"tension must be >= 0, got {tension}")
        return cls(twist, contraction(params, twist), tension)


def _check_twist(params: TsaParams, twist: float) -> None:
    if not 0.0 <= twist <= params.max_twist:
        raise TsaDomainError(
            f"twist {twist!r} outside [0, {params.max_twist:.6g}] rotations"
        )


def contraction(params: TsaParams, twist: float) -> float:
    """Linear contraction (mm) of the string pair after ``twist`` rotations."""
    _check_twist(params, twist)
    L = params.twist_zone_length
    w = TWO_PI * twist * params.string_radius
    # L - sqrt(L^2 - w^2) rewritten to avoid cancellation at small twist
    return w * w / (L + math.sqrt(L * L - w * w))


def linear_jacobian(params: TsaParams, twist: float) -> float:
    """d(contraction)/d(twist) in mm per rotation."""
    _check_twist(params, twist)
    L = params.twist_zone_length
    k = TWO_PI * params.string_radius
    w = k * twist
    return k * k * twist / math.sqrt(L * L - w * w)


def tension_from_torque(params: TsaParams, twist: float, motor_torque: float) -> float:
    """String tension (N) balancing ``motor_torque`` (N*mm) at ``twist``.

    Static power balance ``torque * dtheta = tension * dx``; the Jacobian is
    floored so the result stays finite at zero twist.
    """
    if motor_torque < 0:
        raise TsaDomainError(f"motor_torque must be >= 0, got {motor_torque}")
    jac = linear_jacobian(params, twist)
    return motor_torque / max(jac, params.jacobian_floor)


def torque_from_tension(params: TsaParams, twist: float, tension: float) -> float:
    """Motor torque (N*mm) needed to hold ``tension`` at ``twist``."""
    return tension * max(linear_jacobian(params, twist), params.jacobian_floor)


def twist_for_contraction(params: TsaParams, target: float) -> float:
    """Closed-form inverse of :func:`contraction`."""
    L = params.twist_zone_length
    if not 0.0 <= target < L:
        raise TsaDomainError(f"contraction {target!r} outside [0, {L})")
    w = math.sqrt(L * L - (L - target) ** 2)
    twist = w / (TWO_PI * params.string_radius)
    _check_twist(params, twist)
    return twist


def string_tension(params: TsaParams, twist: float, path_shortening: float) -> float:
    """Tension in a string path whose far end has moved ``path_shortening`` mm.

    The TSA pulls in ``contraction(twist)``; whatever the finger does not
    follow stretches the series compliance once the slack is taken up.
    """
    stretch = contraction(params, twist) - params.slack - path_shortening
    return params.axial_stiffness * stretch if stretch > 0.0 else 0.0

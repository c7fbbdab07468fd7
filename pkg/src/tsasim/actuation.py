"""Gearmotor, encoder and IMU models plus the two proportional control laws."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tsa_core import STALL_TORQUE_NMM

SAMPLE_PERIOD = 0.01  # s


@dataclass(frozen=True)
class MotorParams:
    gear_ratio: float = 30.0
    encoder_counts_per_rev: int = 360  # 12 CPR on the motor shaft x 30:1
    stall_torque: float = STALL_TORQUE_NMM  # N*mm at the output shaft
    no_load_speed: float = 32.5  # rev/s at the output shaft
    supply_voltage: float = 6.0  # V
    time_constant: float = 0.02  # s

    def __post_init__(self):
        if self.stall_torque < 0:
            raise ValueError("stall_torque must be >= 0")
        if self.no_load_speed <= 0:
            raise ValueError("no_load_speed must be > 0")
        if self.supply_voltage <= 0 or self.time_constant <= 0:
            raise ValueError("supply_voltage and time_constant must be > 0")
        if int(self.encoder_counts_per_rev) != self.encoder_counts_per_rev or self.encoder_counts_per_rev <= 0:
            raise ValueError("encoder_counts_per_rev must be a positive integer")

    @property
    def encoder_resolution(self) -> float:
        """Shaft rotations per encoder count."""
        return 1.0 / self.encoder_counts_per_rev


@dataclass(frozen=True)
class MotorState:
    shaft_angle: float = 0.0  # rotations
    shaft_speed: float = 0.0  # rev/s
    applied_voltage: float = 0.0  # V


@dataclass(frozen=True)
class ImuParams:
    error_bound: float = 2.5  # deg
    noise_seed: int = 0


def _clamp(v, limit):
    return max(-limit, min(limit, v))


def steady_speed(params: MotorParams, voltage: float, load_torque: float) -> float:
    """Speed the shaft settles to for a held voltage and resisting load.

    ``load_torque`` resists twisting (positive rotation). The gearbox is
    treated as not back-drivable: the load only slows the shaft and stops it
    completely at stall, it never reverses it.
    """
    v = _clamp(voltage, params.supply_voltage)
    speed = params.no_load_speed * v / params.supply_voltage
    if v > 0.0:
        if load_torque >= params.stall_torque:
            return 0.0
        speed *= 1.0 - max(load_torque, 0.0) / params.stall_torque
    return speed


def motor_step(params: MotorParams, state: MotorState, voltage: float, load_torque: float,
               dt: float) -> MotorState:
    """Advance the motor by ``dt`` seconds with a first-order speed lag."""
    if dt <= 0:
        raise ValueError("dt must be > 0")
    v = _clamp(voltage, params.supply_voltage)
    if v > 0.0 and load_torque >= params.stall_torque:
        # stalled: the shaft holds where it is
        return MotorState(state.shaft_angle, 0.0, v)
    target = steady_speed(params, v, load_torque)
    decay = math.exp(-dt / params.time_constant)
    speed = target + (state.shaft_speed - target) * decay
    angle = state.shaft_angle + 0.5 * (state.shaft_speed + speed) * dt
    return MotorState(angle, speed, v)


def p_control_motor(setpoint: float, measured: float, gain: float,
                    supply_voltage: float = 6.0) -> float:
    """Voltage proportional to the shaft-angle error (V/rot), saturated."""
    if gain <= 0:
        raise ValueError("gain must be > 0")
    return _clamp(gain * (setpoint - measured), supply_voltage)


def closed_loop_bend(target_alpha: float, measured_alpha: float, gain: float,
                     supply_voltage: float = 6.0) -> float:
    """Voltage proportional to the bending-angle error (V/deg), saturated.

    Positive output twists the TSA that bends the finger toward the target;
    an antagonist driven by this law uses the negated voltage.
    """
    if gain <= 0:
        raise ValueError("gain must be > 0")
    return _clamp(gain * (target_alpha - measured_alpha), supply_voltage)


def encoder_read(shaft_angle: float, counts_per_rev: int = 360) -> int:
    # round-off guard so that e.g. 0.1 * 360 does not floor to 35
    return math.floor(shaft_angle * counts_per_rev + 1e-9)


def encoder_angle(shaft_angle: float, counts_per_rev: int = 360) -> float:
    """Shaft angle reconstructed from the quantized count (rotations)."""
    return encoder_read(shaft_angle, counts_per_rev) / counts_per_rev


def _imu_rng(params: ImuParams, run_seed: int | None):
    entropy = [int(params.noise_seed)] if run_seed is None else [int(params.noise_seed), int(run_seed)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def imu_noise(params: ImuParams, count: int, run_seed: int | None = None) -> np.ndarray:
    """Errors for sample indices ``0..count-1``, uniform on +-error_bound."""
    if params.error_bound == 0:
        return np.zeros(count)
    u = _imu_rng(params, run_seed).random(count)
    return params.error_bound * (2.0 * u - 1.0)


def imu_read(true_angle: float, params: ImuParams, sample_index: int,
             run_seed: int | None = None) -> float:
    """IMU reading for one sample; deterministic in (seed, sample_index)."""
    if params.error_bound == 0:
        return float(true_angle)
    return float(true_angle + imu_noise(params, sample_index + 1, run_seed)[sample_index])


class ImuStream:
    """Sequential IMU sampler, equivalent to :func:`imu_read` with indices 0, 1, 2, ..."""

    def __init__(self, params: ImuParams, run_seed: int | None = None):
        self.params = params
        self.index = 0
        self._rng = _imu_rng(params, run_seed)

    def read(self, true_angle: float) -> float:
        self.index += 1
        if self.params.error_bound == 0:
            return float(true_angle)
        return float(true_angle + self.params.error_bound * (2.0 * self._rng.random() - 1.0))

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsasim.actuation import (
    SAMPLE_PERIOD,
    ImuParams,
    ImuStream,
    MotorParams,
    MotorState,
    closed_loop_bend,
    encoder_angle,
    encoder_read,
    imu_noise,
    imu_read,
    motor_step,
    p_control_motor,
    steady_speed,
)

M = MotorParams()


def test_no_load_speed_at_full_voltage():
    assert steady_speed(M, 6.0, 0.0) == M.no_load_speed
    assert steady_speed(M, 12.0, 0.0) == M.no_load_speed  # saturated
    assert steady_speed(M, 3.0, 0.0) == pytest.approx(M.no_load_speed / 2)


def test_stall_stops_the_shaft():
    s = motor_step(M, MotorState(5.0, 10.0), 6.0, M.stall_torque, SAMPLE_PERIOD)
    assert s.shaft_angle == 5.0 and s.shaft_speed == 0.0


@given(st.floats(0.0, 1.0))
def test_load_slows_but_never_reverses(frac):
    v = steady_speed(M, 6.0, frac * M.stall_torque * 1.5)
    assert 0.0 <= v <= M.no_load_speed


def test_step_converges_to_steady_speed():
    s = MotorState()
    for _ in range(100):
        s = motor_step(M, s, 6.0, 0.0, SAMPLE_PERIOD)
    assert s.shaft_speed == pytest.approx(M.no_load_speed, rel=1e-6)
    with pytest.raises(ValueError):
        motor_step(M, s, 6.0, 0.0, 0.0)


@given(st.floats(-100, 100), st.floats(-100, 100), st.floats(0.01, 50))
def test_p_control_saturates(sp, meas, gain):
    v = p_control_motor(sp, meas, gain)
    assert -6.0 <= v <= 6.0
    if abs(gain * (sp - meas)) <= 6.0:
        assert v == pytest.approx(gain * (sp - meas))
    assert math.copysign(1, v) == math.copysign(1, sp - meas) or v == 0


def test_controller_gain_validation():
    with pytest.raises(ValueError):
        p_control_motor(1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        closed_loop_bend(1.0, 0.0, -1.0)
    assert closed_loop_bend(10.0, 0.0, 0.05) == pytest.approx(0.5)
    assert closed_loop_bend(1000.0, 0.0, 0.05) == 6.0


@given(st.integers(-100000, 100000))
def test_encoder_exact_on_counts(count):
    angle = count / 360
    assert encoder_read(angle) == count
    assert abs(encoder_angle(angle) * 360 - count) < 1e-6


@given(st.floats(-100, 100))
def test_encoder_quantizes_down(angle):
    q = encoder_angle(angle)
    assert q <= angle + 1e-9
    assert angle - q < 1 / 360 + 1e-9
    assert abs(q * 360 - round(q * 360)) < 1e-6


def test_imu_noise_bounded_and_spread():
    p = ImuParams()
    e = imu_noise(p, 100_000)
    assert np.all(np.abs(e) <= p.error_bound)
    assert e.max() > 0.99 * p.error_bound and e.min() < -0.99 * p.error_bound
    assert abs(e.mean()) < 0.05


def test_imu_deterministic_and_stream_equivalent():
    p = ImuParams(noise_seed=5)
    stream = ImuStream(p, run_seed=3)
    seq = [stream.read(10.0) for _ in range(50)]
    direct = [imu_read(10.0, p, i, run_seed=3) for i in range(50)]
    assert seq == direct
    other = ImuStream(p, run_seed=4)
    assert [other.read(10.0) for _ in range(50)] != seq


def test_imu_zero_bound_is_exact():
    p = ImuParams(error_bound=0.0)
    assert imu_read(12.5, p, 7) == 12.5
    assert ImuStream(p).read(3.0) == 3.0


@pytest.mark.parametrize("kwargs", [
    {"no_load_speed": 0.0}, {"encoder_counts_per_rev": 0}, {"encoder_counts_per_rev": 1.5},
    {"supply_voltage": 0.0}, {"stall_torque": -1.0},
])
def test_invalid_motor_params(kwargs):
    with pytest.raises(ValueError):
        MotorParams(**kwargs)

"""Experiment protocols replayed on the simulated gripper.

Time-series protocols step a quasi-static rig at the 10 ms sample period:
each tick advances the motors, re-solves the finger equilibrium when a twist
or the load changed, and samples the encoder and IMU. The static
characterizations (blocked force, constant deflection) solve directly.
"""

from __future__ import annotations

import dataclasses
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.optimize import brentq

from .actuation import (
    SAMPLE_PERIOD,
    ImuStream,
    MotorParams,
    MotorState,
    closed_loop_bend,
    encoder_angle,
    encoder_read,
    motor_step,
    p_control_motor,
)
from .config import GripperConfig, config_hash
from .finger import (
    GRAVITY,
    JOINT_COUNT,
    FingerParams,
    HysteresisState,
    NonConvergence,
    Orientation,
    driven_equilibrium,
    lateral_deflection,
)
from .thumb import thumb_pose
from .tsa_core import TsaParams, string_tension, tension_from_torque, torque_from_tension


class Unreachable(RuntimeError):
    """A load cannot be held because the motor would stall first."""

    def __init__(self, message: str, mass: float | None = None):
        super().__init__(message)
        self.mass = mass


class ControlError(RuntimeError):
    """A closed loop failed to settle within its time budget."""


# --- protocol descriptors -------------------------------------------------

@dataclass(frozen=True)
class StaircasePosition:
    step: float = 2.0  # rot
    hold: float = 5.0  # s
    cycles: int = 4
    peak: float = 26.0  # rot
    finger: int = 0
    name: str = field(default="staircase", init=False)


@dataclass(frozen=True)
class RandomSetpoints:
    count: int = 20  # per cycle
    cycles: int = 4
    peak: float = 26.0  # rot
    hold: float = 5.0  # s
    seed: int | None = None  # None -> derived from the run seed
    finger: int = 0
    name: str = field(default="random", init=False)


@dataclass(frozen=True)
class VelocityTest:
    """Large position steps so the P-controller saturates the supply."""

    step: float = 5.0  # rot
    peak: float = 20.0  # rot
    hold: float = 1.0  # s
    cycles: int = 2
    finger: int = 0
    name: str = field(default="velocity", init=False)


@dataclass(frozen=True)
class BlockedForce:
    setpoints: tuple = (13.0, 26.0)  # rot: first contact, then the stall target
    finger: int = 0
    orientation: str = "vu"
    name: str = field(default="blocked", init=False)


@dataclass(frozen=True)
class ConstantDeflection:
    masses: tuple = (0.0, 100.0, 200.0, 300.0, 400.0, 500.0)  # g
    tolerance: float = 1.0  # deg
    finger: int = 0
    load_link: int = JOINT_COUNT
    orientation: str = "hu"
    name: str = field(default="constant_deflection", init=False)


@dataclass(frozen=True)
class StiffnessTuning:
    pretwists: tuple = (0.0, 8.0, 10.0, 15.0)  # rot
    masses: tuple = (0.0, 60.0, 100.0, 120.0, 140.0, 160.0, 200.0)  # g
    hold: float = 30.0  # s
    cycles: int = 2
    setup: float = 10.0  # s per setup phase (pretwist, then antagonist loop)
    finger: int = 0
    load_link: int = JOINT_COUNT
    orientation: str = "hu"
    name: str = field(default="stiffness", init=False)


@dataclass(frozen=True)
class LateralStiffness:
    loads: tuple = (0.0, 0.1, 0.2, 0.5, 1.0)  # N
    pretwists: tuple = (0.0, 3.0, 9.0)  # rot on the antagonist
    hold: float = 30.0  # s, as in the bending stiffness protocol
    setup: float = 5.0  # s
    finger: int = 0
    name: str = field(default="lateral", init=False)


Protocol = Union[StaircasePosition, RandomSetpoints, VelocityTest, BlockedForce,
                 ConstantDeflection, StiffnessTuning, LateralStiffness]

PROTOCOLS = {
    cls.__dataclass_fields__["name"].default: cls
    for cls in (StaircasePosition, RandomSetpoints, VelocityTest, BlockedForce,
                ConstantDeflection, StiffnessTuning, LateralStiffness)
}

TIME_SERIES = ("staircase", "random", "velocity", "stiffness", "lateral")


def make_protocol(name: str, **overrides) -> Protocol:
    try:
        cls = PROTOCOLS[name]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}") from None
    proto = cls(**overrides)
    _validate(proto)
    return proto


def _validate(proto) -> None:
    cycles = getattr(proto, "cycles", 1)
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    for name in ("hold", "step", "setup"):
        if hasattr(proto, name) and not getattr(proto, name) > 0:
            raise ValueError(f"{name} must be > 0")
    if not 0 <= proto.finger < 4:
        raise ValueError("finger must be 0..3")


# --- runs -----------------------------------------------------------------

COLUMNS = ("t_s", "theta_cmd_rot", "theta_meas_rot", "alpha_true_deg", "alpha_meas_deg",
           "tension_primary_N", "tension_antag_N", "mass_g")


@dataclass
class Run:
    """One recorded experiment: metadata plus equal-length sample columns.

    ``alpha_*`` hold the fingertip angle for position protocols, the
    proximal (IMU) angle for the hanging-mass protocols and the lateral
    inclination for the lateral protocol; ``metadata['alpha_source']`` says
    which.
    """

    metadata: dict
    t: np.ndarray
    theta_cmd: np.ndarray
    theta_meas: np.ndarray
    alpha_true: np.ndarray
    alpha_meas: np.ndarray
    tension_primary: np.ndarray
    tension_antag: np.ndarray
    mass_g: np.ndarray

    def __len__(self):
        return len(self.t)

    def columns(self) -> list[np.ndarray]:
        return [self.t, self.theta_cmd, self.theta_meas, self.alpha_true, self.alpha_meas,
                self.tension_primary, self.tension_antag, self.mass_g]


def _mirror(state: MotorState) -> MotorState:
    return MotorState(-state.shaft_angle, -state.shaft_speed, -state.applied_voltage)


def _drive(params: MotorParams, state: MotorState, voltage: float, load: float) -> MotorState:
    """Motor step that lets the string load resist twisting in either direction."""
    if state.shaft_angle < 0 or (state.shaft_angle == 0 and voltage < 0):
        return _mirror(motor_step(params, _mirror(state), -voltage, load, SAMPLE_PERIOD))
    return motor_step(params, state, voltage, load, SAMPLE_PERIOD)


def _brake(old: MotorState, new: MotorState, target: float, counts: int) -> MotorState:
    goal = round(target * counts)
    c0 = encoder_read(old.shaft_angle, counts)
    c1 = encoder_read(new.shaft_angle, counts)
    if c0 == goal or (c1 - goal) * (c0 - goal) > 0:
        return new
    # entry edge of the target count, seen from the approach side
    edge = goal / counts if c0 < goal else (goal + 1 - 1e-6) / counts
    return MotorState(edge, 0.0, new.applied_voltage)


class FingerRig:
    """One finger with its primary and antagonist TSAs, stepped at 10 ms."""

    def __init__(self, config: GripperConfig, finger: int, orientation, seed: int,
                 alpha_source: str = "fingertip", load_link: int = JOINT_COUNT,
                 hysteresis: bool = True):
        if alpha_source not in ("fingertip", "proximal", "lateral"):
            raise ValueError(f"unknown alpha_source {alpha_source!r}")
        self.config = config
        self.finger_params: FingerParams = config.finger(finger)
        self.tsa_p: TsaParams = config.primary(finger)
        self.tsa_a: TsaParams = config.antagonist(finger)
        self.motor: MotorParams = config.motor
        self.orientation = Orientation.parse(orientation)
        self.alpha_source = alpha_source
        self.load_link = load_link
        self.primary = MotorState()
        self.antag = MotorState()
        self.load = 0.0  # N, against flexion
        self.lateral_load = 0.0  # N
        self.hyst = config.hysteresis.make() if hysteresis else HysteresisState()
        self.imu = ImuStream(config.imu, seed)
        self.t_r = 0.0
        self.state, self.t_f = driven_equilibrium(self.finger_params, self.tsa_p, 0.0, 0.0,
                                                  self.orientation, load_link=load_link)
        self._solved = (0.0, 0.0, 0.0)
        self.ticks = 0
        self._rows: list[tuple] = []
        self._alpha0 = None
        self._meas0 = None
        self.last_alpha_abs = self._alpha_abs(hysteresis_step=False)

    # twists the strings actually see
    def twist_p(self) -> float:
        return min(abs(self.primary.shaft_angle), self.tsa_p.max_twist)

    def twist_a(self) -> float:
        return min(abs(self.antag.shaft_angle), self.tsa_a.max_twist)

    def theta_meas(self) -> float:
        return encoder_angle(self.primary.shaft_angle, self.motor.encoder_counts_per_rev)

    def theta_meas_antag(self) -> float:
        return encoder_angle(self.antag.shaft_angle, self.motor.encoder_counts_per_rev)

    def alpha_z(self) -> float:
        """Proximal-phalanx angle as the IMU mount sees it (deg)."""
        return self.state.proximal_angle + self.config.imu_mount_offset

    def _alpha_abs(self, hysteresis_step=True) -> float:
        if self.alpha_source == "fingertip":
            raw = self.state.fingertip_angle
            return self.hyst(raw) if hysteresis_step else raw
        if self.alpha_source == "proximal":
            return self.alpha_z()
        return lateral_deflection(self.finger_params, self.lateral_load, self.t_f, self.t_r)

    def _solve(self):
        key = (self.twist_p(), self.twist_a(), self.load)
        if (abs(key[0] - self._solved[0]) <= 1e-7 and abs(key[1] - self._solved[1]) <= 1e-7
                and key[2] == self._solved[2]):
            return
        self.t_r = string_tension(self.tsa_a, key[1], 0.0)
        try:
            self.state, self.t_f = driven_equilibrium(
                self.finger_params, self.tsa_p, key[0], self.t_r, self.orientation, self.load,
                load_link=self.load_link, initial_angles=self.state.joint_angles,
            )
        except NonConvergence as exc:
            raise NonConvergence(f"{exc} (sample {self.ticks})", exc.iterations,
                                 exc.residual) from None
        self._solved = key

    def step(self, v_primary: float, v_antag: float, target_primary: float | None = None,
             target_antag: float | None = None) -> None:
        """Advance one sample period.

        A ``target_*`` setpoint (rot) arms the driver's brake: when the
        encoder count reaches the target count during the tick, the shaft
        is stopped on that count's edge instead of creeping across it.
        """
        tau_p = torque_from_tension(self.tsa_p, self.twist_p(), self.t_f)
        tau_a = torque_from_tension(self.tsa_a, self.twist_a(), self.t_r)
        counts = self.motor.encoder_counts_per_rev
        for name, tsa, v, tau, target in (("primary", self.tsa_p, v_primary, tau_p, target_primary),
                                          ("antag", self.tsa_a, v_antag, tau_a, target_antag)):
            old = getattr(self, name)
            new = _drive(self.motor, old, v, tau)
            if abs(new.shaft_angle) > tsa.max_twist:
                # mechanical end stop at the twist limit
                new = MotorState(math.copysign(tsa.max_twist, new.shaft_angle), 0.0,
                                 new.applied_voltage)
            if target is not None:
                new = _brake(old, new, target, counts)
            setattr(self, name, new)
        self.ticks += 1
        self._solve()

    def sample(self, theta_cmd: float) -> tuple[float, float]:
        """Record one row; returns (alpha_true, alpha_meas) after normalization."""
        alpha_abs = self._alpha_abs()
        self.last_alpha_abs = alpha_abs
        meas_abs = self.imu.read(alpha_abs)
        if self._alpha0 is None:
            self._alpha0, self._meas0 = alpha_abs, meas_abs
        a_true = alpha_abs - self._alpha0
        a_meas = meas_abs - self._meas0
        mass_g = (self.lateral_load if self.alpha_source == "lateral" else self.load) / GRAVITY * 1e3
        self._rows.append((len(self._rows) * SAMPLE_PERIOD, theta_cmd, self.theta_meas(),
                           a_true, a_meas, self.t_f, self.t_r, mass_g))
        return a_true, meas_abs

    def to_run(self, metadata: dict) -> Run:
        cols = np.array(self._rows, dtype=float).T
        meta = dict(metadata)
        meta.setdefault("alpha_source", self.alpha_source)
        meta["alpha_offset_deg"] = self._alpha0
        return Run(meta, *cols)


def _metadata(config, proto, orientation, seed):
    return {
        "protocol": proto.name,
        "orientation": Orientation.parse(orientation).value,
        "finger": proto.finger,
        "seed": int(seed),
        "config_hash": config_hash(config),
    }


def _quantize(setpoint: float, counts: int) -> float:
    return round(setpoint * counts) / counts


def staircase_schedule(step: float, peak: float, cycles: int) -> list[float]:
    n = int(round(peak / step))
    if n < 1 or abs(n * step - peak) > 1e-9:
        raise ValueError(f"peak {peak} must be a positive multiple of step {step}")
    up = [step * k for k in range(1, n + 1)]
    down = [step * k for k in range(n - 1, -1, -1)]
    return (up + down) * cycles


def random_schedule(count: int, cycles: int, peak: float, seed: int) -> list[float]:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5E7]))
    return [float(v) for v in rng.uniform(0.0, peak, size=count * cycles)]


def _position_run(config, proto, schedule, hold, orientation, seed, hysteresis=True) -> Run:
    rig = FingerRig(config, proto.finger, orientation, seed, hysteresis=hysteresis)
    counts = config.motor.encoder_counts_per_rev
    gain = config.control.position_gain
    vs = config.motor.supply_voltage
    ticks = int(round(hold / SAMPLE_PERIOD))
    rig.sample(0.0)
    for setpoint in schedule:
        sp = _quantize(setpoint, counts)
        for _ in range(ticks):
            rig.step(p_control_motor(sp, rig.theta_meas(), gain, vs), 0.0, sp)
            rig.sample(sp)
    return rig.to_run(_metadata(config, proto, orientation, seed))


def run_protocol(config: GripperConfig, protocol: Protocol, orientation="vu", seed: int = 0,
                 *, hysteresis: bool = True) -> Run:
    """Simulate a time-series protocol and return the recorded run."""
    _validate(protocol)
    if isinstance(protocol, StaircasePosition):
        schedule = staircase_schedule(protocol.step, protocol.peak, protocol.cycles)
        return _position_run(config, protocol, schedule, protocol.hold, orientation, seed, hysteresis)
    if isinstance(protocol, VelocityTest):
        schedule = staircase_schedule(protocol.step, protocol.peak, protocol.cycles)
        return _position_run(config, protocol, schedule, protocol.hold, orientation, seed, hysteresis)
    if isinstance(protocol, RandomSetpoints):
        rs = seed if protocol.seed is None else protocol.seed
        schedule = random_schedule(protocol.count, protocol.cycles, protocol.peak, rs)
        return _position_run(config, protocol, schedule, protocol.hold, orientation, seed, hysteresis)
    if isinstance(protocol, StiffnessTuning):
        raise TypeError("stiffness runs are per pretwist; use stiffness_run")
    if isinstance(protocol, LateralStiffness):
        raise TypeError("lateral runs are per pretwist; use lateral_run")
    raise TypeError(f"{type(protocol).__name__} is not a time-series protocol")


# --- hanging-mass stiffness -----------------------------------------------

def _mass_cycle(masses) -> list[float]:
    masses = list(masses)
    return masses + masses[-2::-1]


def stiffness_run(config: GripperConfig, protocol: StiffnessTuning, pretwist: float,
                  seed: int = 0) -> tuple[Run, list[tuple[int, float, float]]]:
    """Pretension, restore the proximal angle with the antagonist, then load.

    Returns the run and the hold table ``(cycle, mass_g, mean alpha_z)``
    computed from the IMU readings of each mass hold.
    """
    orientation = protocol.orientation
    rig = FingerRig(config, protocol.finger, orientation, seed, alpha_source="proximal",
                    load_link=protocol.load_link)
    counts = config.motor.encoder_counts_per_rev
    ctl = config.control
    vs = config.motor.supply_voltage
    sp = _quantize(pretwist, counts)
    setup_ticks = int(round(protocol.setup / SAMPLE_PERIOD))
    window = deque(maxlen=int(round(0.5 / SAMPLE_PERIOD)))

    # 1 s at rest establishes alpha_z0
    rest = []
    _, z = rig.sample(0.0)
    rest.append(z)
    for _ in range(int(round(1.0 / SAMPLE_PERIOD)) - 1):
        rig.step(0.0, 0.0)
        rest.append(rig.sample(0.0)[1])
    alpha_z0 = float(np.mean(rest))

    def hold_primary():
        return p_control_motor(sp, rig.theta_meas(), ctl.position_gain, vs)

    for _ in range(setup_ticks):
        rig.step(hold_primary(), 0.0, sp)
        rig.sample(sp)

    settled = False
    for _ in range(setup_ticks):
        v_a = 0.0
        if not settled and len(window) == window.maxlen:
            err = float(np.mean(window)) - alpha_z0
            if abs(err) <= ctl.bend_tolerance:
                settled = True
            else:
                v_a = -closed_loop_bend(alpha_z0, float(np.mean(window)), ctl.bend_gain, vs)
        rig.step(hold_primary(), v_a, sp)
        window.append(rig.sample(sp)[1])
    if not settled:
        raise ControlError(f"antagonist did not restore alpha_z0 at pretwist {pretwist} rot")

    hold_ticks = int(round(protocol.hold / SAMPLE_PERIOD))
    table = []
    for cycle in range(protocol.cycles):
        for mass in _mass_cycle(protocol.masses):
            rig.load = mass * 1e-3 * GRAVITY
            readings = []
            for _ in range(hold_ticks):
                rig.step(hold_primary(), 0.0, sp)
                readings.append(rig.sample(sp)[1])
            table.append((cycle, float(mass), float(np.mean(readings))))
    meta = _metadata(config, protocol, orientation, seed)
    meta.update(pretwist_rot=pretwist, antagonist_twist_rot=rig.twist_a(), alpha_z0_deg=alpha_z0)
    return rig.to_run(meta), table


def stiffness_from_table(table, cycle: int) -> float:
    from .analysis import fit_stiffness

    rows = [r for r in table if r[0] == cycle]
    if not rows:
        raise ValueError(f"no holds recorded for cycle {cycle}")
    zero = next(r[2] for r in rows if r[1] == 0.0)
    loads = [m * 1e-3 * GRAVITY for _, m, _ in rows]
    defl = [zero - a for _, _, a in rows]
    return fit_stiffness(loads, defl)


def stiffness_sweep(config: GripperConfig, protocol: StiffnessTuning = StiffnessTuning(),
                    seed: int = 0) -> list[tuple[float, float]]:
    """(pretwist, K_alpha in N/deg) fitted on the last loading cycle.

    Every pretwist uses the same seed, so the sensor noise sequence is the
    same across pretwists and differences come from the mechanics.
    """
    out = []
    for pretwist in protocol.pretwists:
        _, table = stiffness_run(config, protocol, pretwist, seed)
        out.append((float(pretwist), stiffness_from_table(table, protocol.cycles - 1)))
    return out


# --- lateral stiffness ----------------------------------------------------

def lateral_run(config: GripperConfig, protocol: LateralStiffness, pretwist: float,
                seed: int = 0, orientation="vu") -> tuple[Run, list[tuple[float, float]]]:
    """Antagonist pretwist, then monotonically increasing lateral loads."""
    rig = FingerRig(config, protocol.finger, orientation, seed, alpha_source="lateral")
    counts = config.motor.encoder_counts_per_rev
    vs = config.motor.supply_voltage
    sp = _quantize(pretwist, counts)
    rig.sample(0.0)
    for _ in range(int(round(protocol.setup / SAMPLE_PERIOD))):
        v_a = p_control_motor(sp, rig.theta_meas_antag(), config.control.position_gain, vs)
        rig.step(0.0, v_a, None, sp)
        rig.sample(0.0)
    table = []
    for load in protocol.loads:
        rig.lateral_load = float(load)
        readings = []
        for _ in range(int(round(protocol.hold / SAMPLE_PERIOD))):
            v_a = p_control_motor(sp, rig.theta_meas_antag(), config.control.position_gain, vs)
            rig.step(0.0, v_a, None, sp)
            readings.append(rig.sample(0.0)[1])
        table.append((float(load), float(np.mean(readings))))
    base = table[0][1]
    table = [(f, a - base) for f, a in table]
    meta = _metadata(config, protocol, orientation, seed)
    meta.update(antagonist_pretwist_rot=pretwist)
    return rig.to_run(meta), table


def lateral_sweep(config: GripperConfig, protocol: LateralStiffness = LateralStiffness(),
                  seed: int = 0) -> list[tuple[float, float, float]]:
    """(antagonist pretwist, lateral stiffness N/deg, R^2 of the linear fit)."""
    from .analysis import fit_stiffness, r_squared

    out = []
    for pretwist in protocol.pretwists:
        _, table = lateral_run(config, protocol, pretwist, seed)
        loads = [f for f, _ in table]
        defl = [a for _, a in table]
        out.append((float(pretwist), fit_stiffness(loads, defl), r_squared(loads, defl)))
    return out


# --- static force characterizations ---------------------------------------

def _chain_points(params: FingerParams, joint_angles_deg) -> np.ndarray:
    psi = np.cumsum(np.radians(joint_angles_deg))
    ell = np.asarray(params.link_lengths[1:])
    pts = np.zeros((JOINT_COUNT + 1, 2))
    for j in range(JOINT_COUNT):
        pts[j + 1] = pts[j] + ell[j] * np.array([math.cos(psi[j]), math.sin(psi[j])])
    return pts


def blocked_force(config: GripperConfig, protocol: BlockedForce = BlockedForce()) -> float:
    """Fingertip force (N) when the motor stalls against a pinned fingertip.

    The finger closes freely to its pose at the first setpoint, where the
    fingertip is pinned. From there on no joint moves and the motor runs on
    toward the second setpoint until it stalls. The stall tension produces
    tendon torques at every joint; the pinned tip reacts with the force that
    balances them in the compliance-weighted least-squares sense (each
    joint's share weighted by its flexibility). Spring preload and gravity
    are carried by the pin from the moment of contact, so the result scales
    exactly with stall torque.
    """
    params = config.finger(protocol.finger)
    tsa = config.primary(protocol.finger)
    contact, stall_twist = protocol.setpoints
    pose, _ = driven_equilibrium(params, tsa, contact, 0.0, protocol.orientation)
    tension = tension_from_torque(tsa, stall_twist, config.motor.stall_torque)
    tau = params.transmission * np.asarray(params.frontal_moment_arm) * tension
    pts = _chain_points(params, pose.joint_angles)
    lever = pts[JOINT_COUNT] - pts[:JOINT_COUNT]
    # joint i torque from a tip force (fx, fy): lever_x * fy - lever_y * fx
    a = np.column_stack([-lever[:, 1], lever[:, 0]])
    w = 1.0 / np.sqrt(np.asarray(params.joint_stiffness))
    force, *_ = np.linalg.lstsq(a * w[:, None], tau * w, rcond=None)
    return float(np.hypot(*force))


def constant_deflection(config: GripperConfig, masses=None, tolerance: float | None = None,
                        protocol: ConstantDeflection = ConstantDeflection(),
                        twist_step: float = 0.1) -> list[tuple[float, float]]:
    """Smallest motor twist per hanging mass that brings alpha_z back within tolerance.

    Mirrors turning the motor up from zero until the proximal angle is within
    ``tolerance`` of its unloaded value: the twist is marched upward in
    ``twist_step`` increments with the pose carried along, and the motor
    torque is checked against stall at every step. Each mass starts again
    from zero twist, so the result does not depend on the order of
    ``masses``.
    """
    masses = protocol.masses if masses is None else masses
    eps = protocol.tolerance if tolerance is None else tolerance
    if not eps > 0:
        raise ValueError("tolerance must be > 0")
    params = config.finger(protocol.finger)
    tsa = config.primary(protocol.finger)
    orient, link = protocol.orientation, protocol.load_link
    offset = config.imu_mount_offset
    stall = config.motor.stall_torque

    def solve(theta, load, guess):
        return driven_equilibrium(params, tsa, theta, 0.0, orient, load, load_link=link,
                                  initial_angles=guess)

    rest, _ = solve(0.0, 0.0, None)
    alpha_z0 = rest.proximal_angle + offset
    out = []
    for mass in masses:
        if mass < 0:
            raise ValueError("masses must be >= 0")
        load = mass * 1e-3 * GRAVITY
        state, _ = solve(0.0, load, rest.joint_angles)

        def gap(st):
            return st.proximal_angle + offset - (alpha_z0 - eps)

        if gap(state) >= 0.0:
            out.append((float(mass), 0.0))
            continue
        lo, lo_state, hi = 0.0, state, None
        while lo < tsa.max_twist:
            theta = min(lo + twist_step, tsa.max_twist)
            state, tension = solve(theta, load, lo_state.joint_angles)
            if torque_from_tension(tsa, theta, tension) > stall:
                raise Unreachable(f"motor stalls before holding {mass:g} g", mass)
            if gap(state) >= 0.0:
                hi = theta
                break
            lo, lo_state = theta, state
        if hi is None:
            raise Unreachable(f"twist limit reached before holding {mass:g} g", mass)
        root = brentq(lambda th: gap(solve(th, load, lo_state.joint_angles)[0]), lo, hi, xtol=1e-9)
        out.append((float(mass), float(root)))
    return out


# --- thumb ----------------------------------------------------------------

def thumb_sweep(config: GripperConfig, motor: int, twists, orientation="vu") -> np.ndarray:
    """Euler angles (deg) with one thumb motor swept and the other at rest.

    ``motor`` 1 drives the bending chain, 2 the roll joint.
    """
    if motor not in (1, 2):
        raise ValueError("motor must be 1 (bend) or 2 (roll)")
    params = dataclasses.replace(config.thumb, bend_tsa=config.actuators["thumb_bend"],
                                 roll_tsa=config.actuators["thumb_roll"])
    rows = []
    for tw in twists:
        pose = thumb_pose(params, tw, 0.0, orientation) if motor == 1 else \
            thumb_pose(params, 0.0, tw, orientation)
        rows.append(pose.euler)
    return np.asarray(rows)


def max_bend(config: GripperConfig, finger: int = 0, orientation="vu", peak_twist: float = 26.0,
             twist_step: float = 0.05) -> tuple[float, float]:
    """Quasi-static fingertip angle where the primary motor stalls.

    Twists the primary up to ``peak_twist`` with the pose carried along and
    stops at the first step whose holding torque exceeds stall. Returns
    ``(fingertip angle deg, twist rot)``.
    """
    params = config.finger(finger)
    tsa = config.primary(finger)
    stall = config.motor.stall_torque
    state, _ = driven_equilibrium(params, tsa, 0.0, 0.0, orientation)
    reached = 0.0
    limit = min(peak_twist, tsa.max_twist)
    for theta in np.arange(twist_step, limit + twist_step / 2, twist_step):
        theta = min(float(theta), limit)
        trial, tension = driven_equilibrium(params, tsa, theta, 0.0, orientation,
                                            initial_angles=state.joint_angles)
        if torque_from_tension(tsa, theta, tension) > stall:
            break
        state, reached = trial, theta
    return state.fingertip_angle, reached

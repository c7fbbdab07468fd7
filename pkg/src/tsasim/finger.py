"""Pseudo-rigid-body model of one soft finger.

Each triangular cut is a torsional spring joint. The frontal tendon bends
the finger, the rear (antagonistic) tendon opposes it. Angles in the public
API are degrees; the solver works in radians internally and torques are in
N*mm.

Base frame: x runs along the straight finger from palm to tip, y points in
the flexion direction.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tsa_core import TsaParams, string_tension

GRAVITY = 9.80665  # m/s^2
JOINT_COUNT = 3
THEORETICAL_JOINT_MAX = 90.0  # deg, triangular cut fully closed
MEASURED_MAX_BEND = 230.6  # deg, achieved fingertip angle at stall


class NonConvergence(RuntimeError):
    """Equilibrium solve did not converge within the iteration budget."""

    def __init__(self, message: str, iterations: int = 0, residual: float = math.nan):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class FingerDomainError(ValueError):
    pass


class Orientation(enum.Enum):
    VERTICAL_UP = "vu"
    VERTICAL_DOWN = "vd"
    HORIZONTAL_UP = "hu"
    HORIZONTAL_DOWN = "hd"

    @property
    def gravity_direction(self) -> tuple[float, float]:
        """Unit gravity vector in the finger base frame."""
        return _GRAVITY_DIRECTIONS[self]

    @classmethod
    def parse(cls, value: "str | Orientation") -> "Orientation":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        for o in cls:
            if key in (o.value, o.name.lower()):
                return o
        raise ValueError(f"unknown orientation {value!r}; expected one of vu, vd, hu, hd")


_GRAVITY_DIRECTIONS = {
    # fingers above the palm: gravity points back toward the base
    Orientation.VERTICAL_UP: (-1.0, 0.0),
    Orientation.VERTICAL_DOWN: (1.0, 0.0),
    # palm up: flexion is upward, gravity opposes it
    Orientation.HORIZONTAL_UP: (0.0, -1.0),
    Orientation.HORIZONTAL_DOWN: (0.0, 1.0),
}


def _triple(values, name):
    values = tuple(float(v) for v in values)
    if len(values) != JOINT_COUNT:
        raise FingerDomainError(f"{name} needs {JOINT_COUNT} values, got {len(values)}")
    return values


@dataclass(frozen=True)
class FingerParams:
    joint_stiffness: tuple = (40.0, 40.0, 40.0)  # N*mm/rad
    frontal_moment_arm: tuple = (8.0, 6.0, 5.0)  # mm
    rear_moment_arm: tuple = (7.0, 3.0, 3.0)  # mm
    link_lengths: tuple = (20.0, 35.0, 25.0, 20.0)  # mm, base link first
    link_masses: tuple = (4.0, 5.0, 3.5, 3.0)  # g
    tendon_friction_coeff: float = 0.05
    joint_max_angle: float = THEORETICAL_JOINT_MAX  # deg
    # Axial compliance closes the cuts early: effective limit scale.
    axial_knockdown: float = MEASURED_MAX_BEND / (JOINT_COUNT * THEORETICAL_JOINT_MAX)
    # Hyperextension the silicone allows before the back face binds (deg).
    joint_min_angle: float = -30.0
    # Back face has no cut, so hyperextension is stiffer than flexion.
    extension_stiffness_ratio: float = 40.0
    # Silicone compression stiffening, N*mm/rad of joint stiffness per N of
    # total tendon tension.
    tension_stiffening: float = 0.5
    lateral_stiffness: float = 5.0  # N*mm/deg
    lateral_stiffening: float = 0.15  # N*mm/deg per N
    joint_count: int = field(default=JOINT_COUNT, init=False)

    def __post_init__(self):
        for name in ("joint_stiffness", "frontal_moment_arm", "rear_moment_arm"):
            vals = _triple(getattr(self, name), name)
            if min(vals) <= 0:
                raise FingerDomainError(f"{name} must be > 0, got {vals}")
            object.__setattr__(self, name, vals)
        for name in ("link_lengths", "link_masses"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != JOINT_COUNT + 1:
                raise FingerDomainError(f"{name} needs {JOINT_COUNT + 1} values, got {len(vals)}")
            if min(vals) < 0 or (name == "link_lengths" and min(vals) <= 0):
                raise FingerDomainError(f"{name} must be positive, got {vals}")
            object.__setattr__(self, name, vals)
        if not 0.0 <= self.tendon_friction_coeff <= 0.1:
            raise FingerDomainError(
                f"tendon_friction_coeff must be in [0, 0.1], got {self.tendon_friction_coeff}"
            )
        if self.joint_max_angle != THEORETICAL_JOINT_MAX:
            raise FingerDomainError("joint_max_angle is fixed at 90 deg by the cut geometry")
        if not 0.0 < self.axial_knockdown <= 1.0:
            raise FingerDomainError(f"axial_knockdown must be in (0, 1], got {self.axial_knockdown}")
        if not -90.0 <= self.joint_min_angle <= 0.0:
            raise FingerDomainError(f"joint_min_angle must be in [-90, 0], got {self.joint_min_angle}")
        if self.extension_stiffness_ratio <= 0:
            raise FingerDomainError("extension_stiffness_ratio must be > 0")
        for name in ("tension_stiffening", "lateral_stiffening"):
            if getattr(self, name) < 0:
                raise FingerDomainError(f"{name} must be >= 0")
        if self.lateral_stiffness <= 0:
            raise FingerDomainError("lateral_stiffness must be > 0")

    @property
    def effective_max_angle(self) -> float:
        return self.joint_max_angle * self.axial_knockdown

    @property
    def transmission(self) -> np.ndarray:
        """Tension reaching joint i after friction, as a fraction."""
        return (1.0 - self.tendon_friction_coeff) ** np.arange(1, JOINT_COUNT + 1)

    @property
    def finger_length(self) -> float:
        return sum(self.link_lengths[1:])


@dataclass(frozen=True)
class FingerState:
    joint_angles: tuple  # deg
    fingertip_angle: float  # deg
    frontal_displacement: float  # mm
    rear_displacement: float  # mm

    @classmethod
    def from_angles(cls, params: FingerParams, joint_angles: Sequence[float]) -> "FingerState":
        angles = tuple(float(a) for a in joint_angles)
        return cls(
            joint_angles=angles,
            fingertip_angle=sum(angles),
            frontal_displacement=_displacement(params.frontal_moment_arm, angles),
            rear_displacement=_displacement(params.rear_moment_arm, angles),
        )

    @property
    def proximal_angle(self) -> float:
        return self.joint_angles[0]


def _displacement(arms, angles_deg):
    return sum(a * math.radians(p) for a, p in zip(arms, angles_deg))


def tendon_displacement(params: FingerParams, joint_angles: Sequence[float], which: str) -> float:
    """Path shortening (mm) of the frontal or rear tendon for a pose in degrees.

    Positive values mean the frontal path got shorter; the rear path gets
    longer by the returned amount.
    """
    angles = _triple(joint_angles, "joint_angles")
    lo, hi = params.joint_min_angle, params.effective_max_angle
    for p in angles:
        if not lo - 1e-9 <= p <= params.joint_max_angle + 1e-9:
            raise FingerDomainError(f"joint angle {p} outside [{lo}, {hi}] deg")
    if which == "frontal":
        arms = params.frontal_moment_arm
    elif which == "rear":
        arms = params.rear_moment_arm
    else:
        raise ValueError(f"which must be 'frontal' or 'rear', got {which!r}")
    return _displacement(arms, angles)


# --- chain geometry -------------------------------------------------------

def _point_weights(params: FingerParams, load_link: int = JOINT_COUNT) -> np.ndarray:
    """Row p: weights w_j so that point p sits at sum_j w_j * u(psi_j).

    Rows 0..2 are the link centres of mass, row 3 is the distal end of
    ``load_link`` (1-based; 3 is the fingertip) where external loads attach.
    """
    if not 1 <= load_link <= JOINT_COUNT:
        raise FingerDomainError(f"load_link must be in 1..{JOINT_COUNT}, got {load_link}")
    ell = np.asarray(params.link_lengths[1:])
    w = np.zeros((JOINT_COUNT + 1, JOINT_COUNT))
    for k in range(JOINT_COUNT):
        w[k, :k] = ell[:k]
        w[k, k] = 0.5 * ell[k]
    w[JOINT_COUNT, :load_link] = ell[:load_link]
    return w


def _spring_stiffness(params: FingerParams, phi: np.ndarray, extra: float = 0.0) -> np.ndarray:
    k = np.asarray(params.joint_stiffness)
    k = np.where(phi < 0.0, k * params.extension_stiffness_ratio, k)
    return k + extra


def _chain_potential(phi: np.ndarray, weights: np.ndarray, coeffs: np.ndarray):
    """V = sum_p coeffs_p . pos_p with its gradient and Hessian in phi."""
    psi = np.cumsum(phi)
    c, s = np.cos(psi), np.sin(psi)
    # q_j = sum_p w_pj (c_p . u(psi_j)),  r_j = sum_p w_pj (c_p . u'(psi_j))
    cx = weights.T @ coeffs[:, 0]
    cy = weights.T @ coeffs[:, 1]
    q = cx * c + cy * s
    r = -cx * s + cy * c
    grad = np.cumsum(r[::-1])[::-1]
    suffix_q = np.cumsum(q[::-1])[::-1]
    idx = np.maximum.outer(np.arange(JOINT_COUNT), np.arange(JOINT_COUNT))
    hess = -suffix_q[idx]
    return float(q.sum()), grad, hess


def _load_coeffs(params: FingerParams, orientation: Orientation, tip_load: float) -> np.ndarray:
    gx, gy = orientation.gravity_direction
    masses_n = np.asarray(params.link_masses[1:]) * 1e-3 * GRAVITY
    coeffs = np.zeros((JOINT_COUNT + 1, 2))
    coeffs[:JOINT_COUNT, 0] = -masses_n * gx
    coeffs[:JOINT_COUNT, 1] = -masses_n * gy
    # tip load pushes against flexion (-y): V = F * y_tip
    coeffs[JOINT_COUNT, 1] = tip_load
    return coeffs


def external_torques(params: FingerParams, joint_angles_deg, orientation, tip_load=0.0,
                     load_link=JOINT_COUNT):
    """Gravity plus load torque per joint (N*mm), resisting positive flexion."""
    phi = np.radians(np.asarray(joint_angles_deg, dtype=float))
    _, grad, _ = _chain_potential(phi, _point_weights(params, load_link),
                                  _load_coeffs(params, Orientation.parse(orientation), tip_load))
    return grad


def fingertip_position(params: FingerParams, joint_angles_deg) -> np.ndarray:
    """Fingertip (x, y) in mm relative to the first joint."""
    psi = np.cumsum(np.radians(np.asarray(joint_angles_deg, dtype=float)))
    ell = np.asarray(params.link_lengths[1:])
    return np.array([np.sum(ell * np.cos(psi)), np.sum(ell * np.sin(psi))])


def potential_energy(params, joint_angles_deg, frontal_tension, rear_tension, orientation,
                     external_tip_load=0.0, load_link=JOINT_COUNT):
    """Total potential (N*mm) whose stationary points are the fixed-tension equilibria."""
    phi = np.radians(np.asarray(joint_angles_deg, dtype=float))
    eta = params.transmission
    k = _spring_stiffness(params, phi, params.tension_stiffening * (frontal_tension + rear_tension))
    drive = eta * (np.asarray(params.frontal_moment_arm) * frontal_tension
                   - np.asarray(params.rear_moment_arm) * rear_tension)
    v, _, _ = _chain_potential(phi, _point_weights(params, load_link),
                               _load_coeffs(params, Orientation.parse(orientation), external_tip_load))
    return float(0.5 * np.sum(k * phi * phi) - np.sum(drive * phi) + v)


# --- equilibrium solver ---------------------------------------------------

@dataclass
class _Problem:
    params: FingerParams
    orientation: Orientation
    tip_load: float
    rear_tension: float
    frontal: Callable[[float], float]  # path shortening -> tension
    frontal_slope: float  # dT/d(shortening) while taut
    load_link: int = JOINT_COUNT
    weights: np.ndarray = field(init=False)
    coeffs: np.ndarray = field(init=False)

    def __post_init__(self):
        self.weights = _point_weights(self.params, self.load_link)
        self.coeffs = _load_coeffs(self.params, self.orientation, self.tip_load)
        self.arm_f = np.asarray(self.params.frontal_moment_arm)
        self.arm_r = np.asarray(self.params.rear_moment_arm)
        self.eta = self.params.transmission
        self.gamma = self.params.tension_stiffening

    def tension(self, phi):
        return self.frontal(float(self.arm_f @ phi))

    def residual(self, phi):
        t_f = self.tension(phi)
        k_eff = _spring_stiffness(self.params, phi, self.gamma * (t_f + self.rear_tension))
        _, g, h = _chain_potential(phi, self.weights, self.coeffs)
        r = self.eta * (self.arm_f * t_f - self.arm_r * self.rear_tension) - k_eff * phi - g
        # dT_f/dphi_j = -slope * arm_f_j while the string is taut
        dt = -self.frontal_slope * self.arm_f if t_f > 0.0 else np.zeros(JOINT_COUNT)
        jac = (np.outer(self.eta * self.arm_f, dt) - np.diag(k_eff)
               - self.gamma * np.outer(phi, dt) - h)
        return r, jac, t_f


def _active(phi, r, lo, hi, eps=1e-12):
    return ((phi <= lo + eps) & (r < 0)) | ((phi >= hi - eps) & (r > 0))


def _solve(prob: _Problem, phi0, lo, hi, tol, max_iter):
    phi = np.clip(np.asarray(phi0, dtype=float), lo, hi)
    r, jac, t_f = prob.residual(phi)
    for it in range(1, max_iter + 1):
        active = _active(phi, r, lo, hi)
        free = ~active
        rf = np.where(free, r, 0.0)
        merit = float(np.max(np.abs(rf))) if free.any() else 0.0
        if merit < tol:
            return phi, t_f, it - 1
        step = np.zeros(JOINT_COUNT)
        try:
            step[free] = np.linalg.solve(jac[np.ix_(free, free)], -r[free])
        except np.linalg.LinAlgError:
            break
        t = 1.0
        while t > 1e-6:
            trial = np.clip(phi + t * step, lo, hi)
            r_new, jac_new, tf_new = prob.residual(trial)
            rf_new = np.where(~_active(trial, r_new, lo, hi), r_new, 0.0)
            if np.max(np.abs(rf_new)) < merit or t <= 1.0 / 64:
                break
            t *= 0.5
        phi, r, jac, t_f = trial, r_new, jac_new, tf_new
    return None


def _solve_bisection(prob: _Problem, phi0, lo, hi, tol, max_sweeps):
    """Joint-wise bisection sweeps; slow but robust when Newton stalls."""
    phi = np.clip(np.asarray(phi0, dtype=float), lo, hi)
    for sweep in range(max_sweeps):
        for i in range(JOINT_COUNT):
            def ri(x):
                trial = phi.copy()
                trial[i] = x
                return prob.residual(trial)[0][i]
            a, b = lo[i], hi[i]
            ra, rb = ri(a), ri(b)
            if ra <= 0:
                phi[i] = a
            elif rb >= 0:
                phi[i] = b
            else:
                for _ in range(80):
                    m = 0.5 * (a + b)
                    if ri(m) > 0:
                        a = m
                    else:
                        b = m
                    if b - a < 1e-13:
                        break
                phi[i] = 0.5 * (a + b)
        r, _, t_f = prob.residual(phi)
        free = ~_active(phi, r, lo, hi, eps=1e-10)
        if not free.any() or np.max(np.abs(r[free])) < tol:
            return phi, t_f, sweep + 1
    return None


def _run(prob, phi0, tol, max_iter):
    params = prob.params
    lo = np.full(JOINT_COUNT, math.radians(params.joint_min_angle))
    hi = np.full(JOINT_COUNT, math.radians(params.effective_max_angle))
    if phi0 is None:
        phi0 = np.zeros(JOINT_COUNT)
    else:
        phi0 = np.radians(np.asarray(phi0, dtype=float))
    out = _solve(prob, phi0, lo, hi, tol, max_iter)
    if out is None:
        out = _solve_bisection(prob, phi0, lo, hi, tol, max_iter)
    if out is None:
        r, _, _ = prob.residual(np.clip(phi0, lo, hi))
        raise NonConvergence(
            f"finger equilibrium did not converge in {max_iter} iterations",
            iterations=max_iter, residual=float(np.max(np.abs(r))),
        )
    phi, t_f, _ = out
    return FingerState.from_angles(params, np.degrees(phi)), t_f


def equilibrium(
    params: FingerParams,
    frontal_tension: float,
    rear_tension: float,
    orientation: Orientation | str,
    external_tip_load: float = 0.0,
    *,
    load_link: int = JOINT_COUNT,
    initial_angles=None,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> FingerState:
    """Quasi-static pose for given tendon tensions (N) and a tip load (N).

    Solves, per joint, tendon torque - spring torque - gravity - load = 0 by
    projected damped Newton. Joints pinned at a limit may carry a residual
    that pushes into the limit.
    """
    if frontal_tension < 0 or rear_tension < 0:
        raise FingerDomainError("tendon tensions must be >= 0")
    if not math.isfinite(external_tip_load):
        raise FingerDomainError("external_tip_load must be finite")
    prob = _Problem(params, Orientation.parse(orientation), external_tip_load,
                    rear_tension, lambda _s: frontal_tension, 0.0, load_link)
    state, _ = _run(prob, initial_angles, tol, max_iter)
    return state


def driven_equilibrium(
    params: FingerParams,
    frontal_tsa: TsaParams,
    frontal_twist: float,
    rear_tension: float,
    orientation: Orientation | str,
    external_tip_load: float = 0.0,
    *,
    load_link: int = JOINT_COUNT,
    initial_angles=None,
    tol: float = 1e-6,
    max_iter: int = 200,
) -> tuple[FingerState, float]:
    """Pose when the frontal tendon is driven by a TSA at a fixed motor twist.

    The frontal tension follows from the stretch of the string path, so it
    drops as the finger bends toward the contraction. Returns the pose and
    the frontal tension (N).
    """
    if rear_tension < 0:
        raise FingerDomainError("rear_tension must be >= 0")
    prob = _Problem(
        params, Orientation.parse(orientation), external_tip_load, rear_tension,
        lambda s: string_tension(frontal_tsa, frontal_twist, s),
        frontal_tsa.axial_stiffness, load_link,
    )
    return _run(prob, initial_angles, tol, max_iter)


def residuals(params, state: FingerState, frontal_tension, rear_tension, orientation,
              external_tip_load=0.0, load_link=JOINT_COUNT) -> np.ndarray:
    """Joint torque residuals (N*mm) of a pose under fixed tensions."""
    prob = _Problem(params, Orientation.parse(orientation), external_tip_load,
                    rear_tension, lambda _s: frontal_tension, 0.0, load_link)
    r, _, _ = prob.residual(np.radians(np.asarray(state.joint_angles)))
    return r


# --- hysteresis -----------------------------------------------------------

class HysteresisState:
    """Play (backlash) operator with a first-cycle "lonely stroke" offset.

    The output trails the input by half the play width on each branch, so
    descending and ascending branches sit ``play_width`` apart. During the
    first ascending half-cycle the output is additionally lowered by
    ``lonely_stroke_offset`` (ramped in over ``lonely_ramp`` degrees of input
    so the output stays continuous); once the input turns around, that offset
    shrinks linearly with the input and is gone when the input is back at its
    starting value.

    Only the sequence of inputs matters, never their timing.
    """

    def __init__(self, play_width: float = 0.0, lonely_stroke_offset: float = 0.0,
                 lonely_ramp: float = 2.0, reversal_band: float = 1.0):
        if play_width < 0 or lonely_stroke_offset < 0:
            raise ValueError("play_width and lonely_stroke_offset must be >= 0")
        if lonely_ramp <= 0 or reversal_band < 0:
            raise ValueError("lonely_ramp must be > 0 and reversal_band >= 0")
        self.play_width = float(play_width)
        self.lonely_stroke_offset = float(lonely_stroke_offset)
        self.lonely_ramp = float(lonely_ramp)
        self.reversal_band = float(reversal_band)
        self.reset()

    def reset(self) -> None:
        self.last_output: float | None = None
        self.first_cycle_flag = True
        self._start = 0.0
        self._peak = 0.0
        self._descending = False
        self._turn_input = 0.0
        self._turn_offset = 0.0
        self._fraction = 1.0

    def _ramp(self, x):
        return self.lonely_stroke_offset * min(1.0, max(0.0, (x - self._start) / self.lonely_ramp))

    def __call__(self, raw: float) -> float:
        raw = float(raw)
        half = 0.5 * self.play_width
        if self.last_output is None:
            self.last_output = raw
            self._start = self._peak = raw
        y = max(raw - half, min(raw + half, self.last_output))
        self.last_output = y
        if not self.first_cycle_flag or self.lonely_stroke_offset == 0.0:
            return y
        if not self._descending:
            if raw >= self._peak:
                self._peak = raw
            elif raw < self._peak - self.reversal_band:
                self._descending = True
                self._turn_input = raw
                self._turn_offset = self._ramp(self._peak)
            if not self._descending:
                return y - self._ramp(self._peak)
        span = self._turn_input - self._start
        frac = (raw - self._start) / span if span > 0 else 0.0
        self._fraction = min(self._fraction, max(0.0, frac))
        if self._fraction <= 0.0:
            self.first_cycle_flag = False
            return y
        return y - self._turn_offset * self._fraction


def apply_hysteresis(h: HysteresisState, raw_alpha: float) -> float:
    return h(raw_alpha)


def lateral_deflection(params: FingerParams, lateral_load: float, frontal_tension: float,
                       rear_tension: float) -> float:
    """Inclination (deg) of the finger under a lateral tip load (N).

    Lumped torsional spring whose stiffness rises affinely with the total
    tendon tension.
    """
    if lateral_load < 0:
        raise FingerDomainError("lateral_load must be >= 0")
    k = params.lateral_stiffness + params.lateral_stiffening * (frontal_tension + rear_tension)
    return lateral_load * params.finger_length / k

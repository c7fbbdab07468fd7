"""Gripper configuration: every tunable constant in one validated object.

Configs are YAML files. Parsing validates each value and reports the dotted
path of the offending field, so ``fingers[2].joint_stiffness`` rather than a
bare ``ValueError``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from .actuation import ImuParams, MotorParams
from .finger import FingerParams, HysteresisState
from .thumb import ThumbParams
from .tsa_core import TsaParams

FINGER_NAMES = ("index", "middle", "ring", "little")

# Eleven motors: primary + antagonist per finger, three on the thumb.
ACTUATOR_NAMES = tuple(
    f"finger{i}_{role}" for i in range(len(FINGER_NAMES)) for role in ("primary", "antagonist")
) + ("thumb_bend", "thumb_roll", "thumb_antagonist")


class ConfigError(ValueError):
    """Invalid or malformed configuration; ``path`` names the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass(frozen=True)
class ControlGains:
    position_gain: float = 2.3  # V per rotation of shaft-angle error
    bend_gain: float = 0.05  # V per degree of bending-angle error
    bend_tolerance: float = 1.0  # deg, closed-loop bend considered settled

    def __post_init__(self):
        for name in ("position_gain", "bend_gain", "bend_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")


@dataclass(frozen=True)
class HysteresisParams:
    play_width: float = 4.0  # deg
    lonely_stroke_offset: float = 6.0  # deg
    lonely_ramp: float = 2.0  # deg
    reversal_band: float = 1.0  # deg
    enabled: bool = True

    def make(self) -> HysteresisState:
        if not self.enabled:
            return HysteresisState(0.0, 0.0)
        return HysteresisState(self.play_width, self.lonely_stroke_offset,
                               self.lonely_ramp, self.reversal_band)

    def __post_init__(self):
        self.make()  # reuses the operator's own validation


@dataclass(frozen=True)
class Footprint:
    """Physical envelope, carried as metadata only."""

    palm_width: float = 106.0  # mm
    palm_depth: float = 106.0  # mm
    height: float = 295.0  # mm


def _default_actuators():
    acts = {}
    for i in range(len(FINGER_NAMES)):
        acts[f"finger{i}_primary"] = TsaParams(slack=3.0)
        acts[f"finger{i}_antagonist"] = TsaParams(slack=0.1)
    acts["thumb_bend"] = TsaParams(slack=3.0)
    acts["thumb_roll"] = TsaParams(slack=0.5)
    acts["thumb_antagonist"] = TsaParams(slack=0.1)
    return acts


@dataclass(frozen=True)
class GripperConfig:
    fingers: tuple = field(default_factory=lambda: tuple(FingerParams() for _ in FINGER_NAMES))
    thumb: ThumbParams = field(default_factory=ThumbParams)
    actuators: dict = field(default_factory=_default_actuators)
    motor: MotorParams = field(default_factory=MotorParams)
    imu: ImuParams = field(default_factory=ImuParams)
    control: ControlGains = field(default_factory=ControlGains)
    hysteresis: HysteresisParams = field(default_factory=HysteresisParams)
    imu_mount_offset: float = 4.0  # deg, IMU reading with the finger at rest
    footprint: Footprint = field(default_factory=Footprint)

    def __post_init__(self):
        if len(self.fingers) != len(FINGER_NAMES):
            raise ValueError(f"need {len(FINGER_NAMES)} fingers, got {len(self.fingers)}")
        missing = set(ACTUATOR_NAMES) - set(self.actuators)
        extra = set(self.actuators) - set(ACTUATOR_NAMES)
        if missing or extra:
            raise ValueError(f"actuator names mismatch: missing {sorted(missing)}, unknown {sorted(extra)}")

    def finger(self, index: int) -> FingerParams:
        return self.fingers[index]

    def primary(self, index: int) -> TsaParams:
        return self.actuators[f"finger{index}_primary"]

    def antagonist(self, index: int) -> TsaParams:
        return self.actuators[f"finger{index}_antagonist"]

    def replace_finger(self, index: int, params: FingerParams) -> "GripperConfig":
        fingers = list(self.fingers)
        fingers[index] = params
        return dataclasses.replace(self, fingers=tuple(fingers))

    def replace_actuator(self, name: str, params: TsaParams) -> "GripperConfig":
        acts = dict(self.actuators)
        acts[name] = params
        return dataclasses.replace(self, actuators=acts)

    def to_dict(self) -> dict:
        return _encode(self)

    def digest(self) -> str:
        return config_hash(self)


# --- (de)serialization ----------------------------------------------------

_NESTED = {
    "thumb": ThumbParams,
    "motor": MotorParams,
    "imu": ImuParams,
    "control": ControlGains,
    "hysteresis": HysteresisParams,
    "footprint": Footprint,
    "finger_params": FingerParams,
    "bend_tsa": TsaParams,
    "roll_tsa": TsaParams,
}


def _encode(obj) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _encode(getattr(obj, f.name))
                for f in dataclasses.fields(obj) if f.init}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (tuple, list)):
        return [_encode(v) for v in obj]
    return obj


def _freeze(value):
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def _build(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls) if f.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}" if path else unknown[0], "unknown field")
    kwargs = {}
    for name, value in data.items():
        sub = f"{path}.{name}" if path else name
        if name in _NESTED:
            kwargs[name] = _build(_NESTED[name], value, sub)
        else:
            _check_scalar(value, sub)
            kwargs[name] = _freeze(value)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        # name the field when the message mentions it
        for name in data:
            if name in str(exc):
                raise ConfigError(f"{path}.{name}" if path else name, str(exc)) from exc
        raise ConfigError(path, str(exc)) from exc


def _check_scalar(value, path):
    if isinstance(value, list):
        for i, v in enumerate(value):
            _check_scalar(v, f"{path}[{i}]")
    elif value is not None and not isinstance(value, (int, float, bool, str)):
        raise ConfigError(path, f"unsupported value of type {type(value).__name__}")
    elif isinstance(value, float) and value != value:
        raise ConfigError(path, "NaN is not allowed")


def config_from_dict(data: dict) -> GripperConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "config must be a mapping")
    allowed = {f.name for f in dataclasses.fields(GripperConfig)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    kwargs = {}
    for name, value in data.items():
        if name == "fingers":
            if not isinstance(value, list) or len(value) != len(FINGER_NAMES):
                raise ConfigError("fingers", f"expected a list of {len(FINGER_NAMES)} fingers")
            kwargs[name] = tuple(_build(FingerParams, v, f"fingers[{i}]") for i, v in enumerate(value))
        elif name == "actuators":
            if not isinstance(value, dict):
                raise ConfigError("actuators", "expected a mapping")
            for key in value:
                if key not in ACTUATOR_NAMES:
                    raise ConfigError(f"actuators.{key}", "unknown actuator")
            for key in ACTUATOR_NAMES:
                if key not in value:
                    raise ConfigError(f"actuators.{key}", "missing actuator")
            kwargs[name] = {k: _build(TsaParams, value[k], f"actuators.{k}") for k in ACTUATOR_NAMES}
        elif name in _NESTED:
            kwargs[name] = _build(_NESTED[name], value, name)
        else:
            _check_scalar(value, name)
            kwargs[name] = value
    try:
        return GripperConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("", str(exc)) from exc


def dump_config(config: GripperConfig, header: str = "") -> str:
    body = yaml.safe_dump(config.to_dict(), sort_keys=False, default_flow_style=None, width=100)
    if header:
        lines = "".join(f"# {line}\n" if line else "#\n" for line in header.splitlines())
        return lines + body
    return body


def parse_config(text: str) -> GripperConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"malformed YAML: {exc}") from exc
    if data is None:
        data = {}
    return config_from_dict(data)


def load_config(path: str | Path) -> GripperConfig:
    return parse_config(Path(path).read_text())


def default_config() -> GripperConfig:
    """The calibrated configuration shipped with the package."""
    text = resources.files("tsasim").joinpath("data/default_config.yaml").read_text()
    return parse_config(text)


def config_hash(config: GripperConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()

import dataclasses

import pytest
import yaml
from hypothesis import given
from hypothesis import strategies as st

from tsasim.config import (
    ACTUATOR_NAMES,
    ConfigError,
    GripperConfig,
    config_from_dict,
    config_hash,
    default_config,
    dump_config,
    load_config,
    parse_config,
)
from tsasim.finger import FingerParams
from tsasim.tsa_core import TsaParams


def test_eleven_actuators(config):
    assert len(ACTUATOR_NAMES) == 11
    assert set(config.actuators) == set(ACTUATOR_NAMES)
    assert len(config.fingers) == 4


def test_packaged_config_round_trips(config):
    again = parse_config(dump_config(config, "header line"))
    assert again == config
    assert config_hash(again) == config_hash(config)


def test_packaged_config_matches_code_defaults(config):
    assert config == GripperConfig()


@given(st.floats(30.0, 120.0), st.floats(0.1, 1.0), st.floats(0.0, 5.0),
       st.lists(st.floats(1.0, 200.0), min_size=3, max_size=3), st.integers(0, 3))
def test_round_trip_arbitrary_values(length, radius, slack, stiffness, finger):
    c = GripperConfig()
    c = c.replace_actuator("thumb_roll", TsaParams(twist_zone_length=length, string_radius=radius,
                                                   slack=slack))
    c = c.replace_finger(finger, dataclasses.replace(FingerParams(), joint_stiffness=tuple(stiffness)))
    again = parse_config(dump_config(c))
    assert again == c
    assert config_hash(again) == config_hash(c)


def test_hash_is_content_digest(config):
    changed = config.replace_finger(1, dataclasses.replace(config.finger(1), lateral_stiffness=6.0))
    assert config_hash(changed) != config_hash(config)
    assert len(config_hash(config)) == 64


def _data(config):
    return yaml.safe_load(dump_config(config))


def test_negative_string_radius_names_field(config):
    d = _data(config)
    d["actuators"]["finger2_primary"]["string_radius"] = -0.35
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert exc.value.path == "actuators.finger2_primary.string_radius"


def test_bad_finger_field_named(config):
    d = _data(config)
    d["fingers"][1]["joint_stiffness"] = [1.0, -2.0, 3.0]
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert exc.value.path == "fingers[1].joint_stiffness"


@pytest.mark.parametrize("mutate,path", [
    (lambda d: d.update(bogus=1), "bogus"),
    (lambda d: d["motor"].update(spin=1), "motor.spin"),
    (lambda d: d["actuators"].pop("thumb_roll"), "actuators.thumb_roll"),
    (lambda d: d["actuators"].update(extra={}), "actuators.extra"),
    (lambda d: d.update(fingers=[]), "fingers"),
    (lambda d: d.update(motor=3), "motor"),
    (lambda d: d["imu"].update(error_bound=float("nan")), "imu.error_bound"),
])
def test_structural_errors(config, mutate, path):
    d = _data(config)
    mutate(d)
    with pytest.raises(ConfigError) as exc:
        config_from_dict(d)
    assert exc.value.path == path


def test_malformed_yaml():
    with pytest.raises(ConfigError):
        parse_config("fingers: [unclosed")
    with pytest.raises(ConfigError):
        parse_config("- a list")


def test_empty_document_gives_defaults():
    assert parse_config("") == GripperConfig()


def test_load_from_file(tmp_path, config):
    p = tmp_path / "c.yaml"
    p.write_text(dump_config(config))
    assert load_config(p) == config
    assert default_config() == config

import json
from pathlib import Path

import numpy as np
import pytest

from nonstop.config import ConfigError, ScenarioConfig
from nonstop.geometry import AttachmentLayout

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.mark.parametrize("name", ["reference5.json", "circle10.json"])
def test_round_trip_is_identity(name):
    cfg = ScenarioConfig.load_file(CONFIGS / name)
    d = cfg.to_dict()
    again = ScenarioConfig.from_dict(json.loads(json.dumps(d)))
    assert again == cfg
    assert again.to_dict() == d


def test_defaults_round_trip():
    cfg = ScenarioConfig.from_dict({})
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.layout.params["n"] == 5
    assert cfg.load.mass == 0.5


def test_explicit_sections_round_trip():
    d = {
        "layout": {"points": [[1, 0, 0], [0, 1, 0], [-1, 0, 0], [0, -1, 0.3]]},
        "wrench": {"explicit": {"force": [0, 0, 4.9], "torque": [0, 0.1, 0]}},
        "orbit": {"A": np.eye(6, 2).tolist(), "omega": 2.0},
        "carrier": {"K1": [1, 2, 3], "gain_order": "verbatim"},
    }
    cfg = ScenarioConfig.from_dict(d)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.build_wrench().force[2] == 4.9


@pytest.mark.parametrize("bad", [
    {"colour": 1},
    {"load": {"mass": 0.5, "density": 3}},
    {"layout": {"circle": {"n": 5, "diameter": 2}}},
    {"layout": {"spiral": {"n": 5}}},
    {"orbit": {"sampler": {"trials": 10, "speed": 1}}},
    {"wrench": {"gravity": {"direction": [0, 0, -1], "mass": 2}}},
    {"sim": {"dt": 1e-3, "steps": 10}},
])
def test_unknown_fields_rejected(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


@pytest.mark.parametrize("bad", [
    {"load": {"mass": -1}},
    {"load": {"mass": True}},
    {"cable": {"stiffness": 0}},
    {"sim": {"dt": 0}},
    {"layout": {"circle": {"n": 2}}},
    {"layout": {"circle": {"radius": 1}}},
    {"layout": {"points": [[0, 0], [1, 1]]}},
    {"orbit": {"sampler": {"trials": 0}}},
    {"orbit": {"A": [[1, 2, 3]]}},
    {"carrier": {"gain_order": "swapped"}},
    {"wrench": {"gravity": {}, "explicit": {}}},
])
def test_invalid_values_rejected(bad):
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict(bad)


def test_layout_generators_match_library():
    cfg = ScenarioConfig.load_file(CONFIGS / "reference5.json")
    ref = AttachmentLayout.perturbed_circle(5, 1.2, 0.2, 1.0, 0.2, seed=1)
    assert np.array_equal(cfg.layout.build().b, ref.b)
    cfg = ScenarioConfig.load_file(CONFIGS / "circle10.json")
    assert np.array_equal(cfg.layout.build().b, AttachmentLayout.circle(10, 1.2).b)


def test_world_carries_config_values():
    cfg = ScenarioConfig.from_dict({"cable": {"stiffness": 650.0}, "sim": {"dt": 5e-4, "duration": 3}})
    world = cfg.build_world(cfg.layout.build())
    assert world.cables.Kc == 650.0
    assert world.dt == 5e-4 and world.duration == 3.0


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.load_file(p)

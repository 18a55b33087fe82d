"""Shared fixtures: the default hand, small scenario files, tolerances."""

import json

import numpy as np
import pytest

from biohand.hand_model import default_hand24


@pytest.fixture(scope="session")
def hand():
    return default_hand24()


@pytest.fixture()
def rng():
    # Function-scoped: every test draws the same stream regardless of which
    # other tests ran before it.
    return np.random.default_rng(1234)


def make_scenario_dict(**overrides) -> dict:
    """A minimal valid scenario: short touch task against a fixed cylinder."""
    base = {
        "name": "mini_touch",
        "hand_model": "hand24",
        "duration": 0.5,
        "sim_dt": 0.001,
        "ctrl_dt": 0.01,
        "seed": 0,
        "basis": {"n_basis": 6, "phase_tau": 1.0},
        "controller": "adaptive",
        "controllers": {
            "adaptive": {"pi": 10.0, "q_k": 10.0, "q_d": 1.0, "q_v": 10.0,
                         "ks_init": 1.0, "kd_init": 0.1, "gain_decay": 40.0},
            "fixed": {"pi": 10.0, "ks_init": 8.0, "kd_init": 0.3},
            "position": {"pi": 10.0, "ks_init": 30.0, "kd_init": 0.05},
        },
        "scene": [
            {
                "id": "pad",
                "shape": "cylinder",
                "radius": 0.05,
                "half_height": 0.05,
                "pose": {"pos": [0.105, 0.0, -0.125], "rpy": [1.5707963267948966, 0.0, 0.0]},
                "mobility": "fixed",
                "contact_stiffness": 5000.0,
                "contact_damping": 10.0,
                "friction": 0.8,
            }
        ],
        "reference": {"kind": "scripted", "task": "touch",
                      "params": {"reach_time": 0.3, "press_extra": 0.06}},
        "success": {"type": "none"},
    }
    base.update(overrides)
    return base


@pytest.fixture
def scenario_file(tmp_path):
    """Write a customizable mini scenario; returns (path_factory)."""

    def write(**overrides):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(make_scenario_dict(**overrides)))
        return path

    return write

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module

from skyfleet.config import ScenarioConfig
from skyfleet.scenario import generate_scenario


def make_config(**overrides) -> ScenarioConfig:
    """A small, valid scenario with sensible test defaults."""
    base = dict(num_uavs=1, num_users=8, num_clusters=1, seed=123)
    base.update(overrides)
    return ScenarioConfig(**base).validate()


@pytest.fixture
def battery_config() -> ScenarioConfig:
    return make_config(battery_limited=True, num_cs=1, seed=5)


@pytest.fixture
def battery_scenario(battery_config):
    world, users = generate_scenario(battery_config)
    return battery_config, world, users

"""Deterministic multi-UAV multi-service mission simulator.

Seedable grid-world environment for drone fleets providing throughput,
edge computing, and data gathering services, with tabular RL training,
a scripted patrol baseline, and quality-of-experience reporting.
"""

from .config import ConfigError, RewardParams, RLParams, ScenarioConfig
from .env import ActionId, Mode, StateCodec, UavAgent, UavEnv, valid_action_ids
from .learn import Hyperparams, QTable, evaluate, train
from .metrics import QoEReport, compute_qoe
from .presets import CASE_IDS, case_preset
from .scenario import ServiceType, User, World, generate_scenario, generate_world, sample_users

__version__ = "0.1.0"

__all__ = [
    "ActionId",
    "CASE_IDS",
    "ConfigError",
    "Hyperparams",
    "Mode",
    "QTable",
    "QoEReport",
    "RLParams",
    "RewardParams",
    "ScenarioConfig",
    "ServiceType",
    "StateCodec",
    "UavAgent",
    "UavEnv",
    "User",
    "World",
    "case_preset",
    "compute_qoe",
    "evaluate",
    "generate_scenario",
    "generate_world",
    "sample_users",
    "train",
    "valid_action_ids",
]

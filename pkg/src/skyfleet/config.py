"""Scenario configuration schema, validation, and JSON (de)serialization."""

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


class ConfigError(ValueError):
    """A scenario configuration violates an invariant or is infeasible."""


@dataclass
class RewardParams:
    """Battery thresholds (minutes) and multi-service reward weights."""

    c1: float = 24.0
    c2: float = 18.0
    c3: float = 12.0
    c4: float = 6.0
    w_u: float = 0.4
    w_tr: float = 0.2
    w_ec: float = 0.2
    w_dg: float = 0.2
    r_cs_const: float = 0.0  # throughput service cost, negligible by default

    def validate(self, battery_minutes: float) -> None:
        if not (battery_minutes >= self.c1 > self.c2 > self.c3 > self.c4 > 0):
            raise ConfigError(
                "battery thresholds must satisfy battery >= c1 > c2 > c3 > c4 > 0, "
                f"got battery={battery_minutes}, c=({self.c1},{self.c2},{self.c3},{self.c4})"
            )
        wsum = self.w_u + self.w_tr + self.w_ec + self.w_dg
        if abs(wsum - 1.0) > 1e-9:
            raise ConfigError(f"service weights must sum to 1, got {wsum}")
        if min(self.w_u, self.w_tr, self.w_ec, self.w_dg) < 0:
            raise ConfigError("service weights must be non-negative")


@dataclass
class RLParams:
    """Tabular training hyperparameters."""

    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    # None means 80% of the training epoch budget, resolved at train time.
    epsilon_decay_epochs: int | None = None
    qtable_init: str = "random"  # zero | random | max_reward | prior
    training_epochs: int = 500

    def validate(self) -> None:
        if not (0 < self.alpha <= 1):
            raise ConfigError(f"alpha must be in (0,1], got {self.alpha}")
        if not (0 <= self.gamma < 1):
            raise ConfigError(f"gamma must be in [0,1), got {self.gamma}")
        if not (self.epsilon_start >= self.epsilon_end >= 0):
            raise ConfigError("epsilon schedule must satisfy start >= end >= 0")
        if self.qtable_init not in ("zero", "random", "max_reward", "prior"):
            raise ConfigError(f"unknown qtable_init {self.qtable_init!r}")
        if self.training_epochs < 0:
            raise ConfigError("training_epochs must be >= 0")


@dataclass
class ScenarioConfig:
    """Full declarative description of a use case.

    Geometry and population defaults follow the desk-scale scenario:
    10x10 grid of 240 m cells, 600 m footprint, 30-minute battery,
    1-minute iterations and 30-iteration epochs.
    """

    grid_rows: int = 10
    grid_cols: int = 10
    cell_size_m: float = 240.0

    num_uavs: int = 1
    num_users: int = 14
    num_clusters: int = 1
    num_cs: int = 0
    num_services: int = 1
    cluster_radius_m: tuple[float, float] = (240.0, 480.0)

    obstacle_coverage: float = 0.0
    max_building_height_m: float = 120.0
    altitude_levels: int = 4
    level_height_m: float | None = None  # default: max height / levels

    # The seven configuration axes.
    is_3d: bool = False
    battery_limited: bool = False
    bandwidth_limited: bool = False
    dynamic_requests: bool = False
    users_move: bool = False
    multi_service: bool = False
    position_noise: bool = False

    max_speed_mps: float = 8.3
    max_accel_mps2: float = 4.0
    footprint_radius_m: float = 600.0
    battery_minutes: int = 30
    bandwidth_mhz: float = 5.0

    iteration_seconds: float = 60.0
    epoch_iterations: int = 30

    reward_params: RewardParams = field(default_factory=RewardParams)
    rl: RLParams = field(default_factory=RLParams)

    p_obs_error: float = 0.1
    p_user_move: float = 0.2
    p_request_arrival: float = 0.05
    demand_range: tuple[int, int] = (1, 10)
    tr_bandwidth_per_user_mhz: float = 1.0

    # The battery weight schedule's 0.8 band is written with empty
    # "(c1, c1]" bounds; True applies the intended (c2, c1] reading.
    eq34_typo_fix: bool = True

    seed: int = 0

    def __post_init__(self):
        if not self.is_3d:
            self.altitude_levels = 1
        if self.level_height_m is None:
            self.level_height_m = self.max_building_height_m / self.altitude_levels
        self.cluster_radius_m = tuple(self.cluster_radius_m)
        self.demand_range = tuple(self.demand_range)

    # -- derived quantities -------------------------------------------------

    @property
    def num_cells(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def map_width_m(self) -> float:
        return self.grid_cols * self.cell_size_m

    @property
    def map_height_m(self) -> float:
        return self.grid_rows * self.cell_size_m

    @property
    def battery_bins(self) -> int:
        """Battery resolution in the agent state: 5 bins, or 1 when unused."""
        return 5 if self.battery_limited else 1

    @property
    def state_representation(self) -> int:
        """Which of the four state layouts applies (1=2D, 2=2D+battery, 3=3D, 4=3D+battery)."""
        return {  # (is_3d, battery_limited)
            (False, False): 1,
            (False, True): 2,
            (True, False): 3,
            (True, True): 4,
        }[(self.is_3d, self.battery_limited)]

    # -- validation ---------------------------------------------------------

    def validate(self) -> "ScenarioConfig":
        if self.grid_rows <= 0 or self.grid_cols <= 0:
            raise ConfigError("grid dimensions must be positive")
        if self.cell_size_m <= 0:
            raise ConfigError("cell_size_m must be positive")
        if self.num_uavs <= 0:
            raise ConfigError("num_uavs must be positive")
        if self.num_users <= 0:
            raise ConfigError("num_users must be positive")
        if self.num_clusters <= 0:
            raise ConfigError("num_clusters must be positive")
        if self.num_cs < 0:
            raise ConfigError("num_cs must be non-negative")
        if self.num_cs > self.num_cells:
            raise ConfigError(
                f"num_cs={self.num_cs} exceeds the {self.num_cells} available cells"
            )
        if self.num_services not in (1, 3):
            raise ConfigError("num_services must be 1 or 3")
        if self.multi_service != (self.num_services == 3):
            raise ConfigError("multi_service flag must match num_services (3 <=> multi)")
        lo, hi = self.cluster_radius_m
        if not (0 < lo <= hi):
            raise ConfigError("cluster_radius_m must be a positive interval [lo, hi]")
        if not (0 <= self.obstacle_coverage <= 1):
            raise ConfigError("obstacle_coverage must be in [0,1]")
        n_obstacles = round(self.obstacle_coverage * self.num_cells)
        budget = self.num_cells - self.num_cs - self.num_clusters
        if n_obstacles > 0 and n_obstacles > budget:
            raise ConfigError(
                f"obstacle budget infeasible: {n_obstacles} buildings requested but only "
                f"{budget} cells remain after charging stations and cluster centroids"
            )
        if self.battery_limited and self.num_cs < 1:
            raise ConfigError("battery_limited requires at least one charging station")
        if self.altitude_levels < 1:
            raise ConfigError("altitude_levels must be >= 1")
        if not self.is_3d and self.altitude_levels != 1:
            raise ConfigError("2D scenarios are single-altitude")
        if self.level_height_m <= 0:
            raise ConfigError("level_height_m must be positive")
        if self.max_speed_mps <= 0 or self.max_accel_mps2 <= 0:
            raise ConfigError("kinematic limits must be positive")
        if self.battery_minutes <= 0:
            raise ConfigError("battery_minutes must be positive")
        if self.epoch_iterations <= 0:
            raise ConfigError("epoch_iterations must be positive")
        if not (0 <= self.p_obs_error <= 1):
            raise ConfigError("p_obs_error must be in [0,1]")
        if not (0 <= self.p_user_move <= 1):
            raise ConfigError("p_user_move must be in [0,1]")
        if not (0 <= self.p_request_arrival <= 1):
            raise ConfigError("p_request_arrival must be in [0,1]")
        dlo, dhi = self.demand_range
        if not (1 <= dlo <= dhi):
            raise ConfigError("demand_range must satisfy 1 <= lo <= hi")
        self.reward_params.validate(self.battery_minutes)
        self.rl.validate()
        return self

    # -- JSON ---------------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["cluster_radius_m"] = list(self.cluster_radius_m)
        d["demand_range"] = list(self.demand_range)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "reward_params" in data and isinstance(data["reward_params"], dict):
            data["reward_params"] = RewardParams(**data["reward_params"])
        if "rl" in data and isinstance(data["rl"], dict):
            data["rl"] = RLParams(**data["rl"])
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(f"bad config document: {exc}") from exc
        return cfg.validate()


def load_config(path: str | Path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def save_config(config: ScenarioConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

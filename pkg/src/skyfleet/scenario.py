"""Procedural generation of the static scene: buildings, charging
stations, user clusters, and the users themselves.

Everything here is a pure function of (config, seed): the world draws
from the world stream and users from the user stream, so regenerating
with the same seed is bit-identical regardless of which features are
enabled elsewhere.
"""

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import rng
from .config import ConfigError, ScenarioConfig

WORLD_SCHEMA = "skyfleet-world/1"


class ServiceType(IntEnum):
    THROUGHPUT = 0
    EDGE_COMPUTING = 1
    DATA_GATHERING = 2


@dataclass
class User:
    """One service consumer and its request bookkeeping."""

    id: int
    home_cluster: int
    pos_m: tuple[float, float]
    service: ServiceType
    demand_iters: int
    bw_need_mhz: float
    request_iter: int = 0
    served_iters: int = 0
    completion_iter: int | None = None


@dataclass
class World:
    """Generated static scene. Heights are per cell; 0 means free."""

    building_height_m: np.ndarray  # shape (rows, cols)
    cs_cells: list[tuple[int, int]]
    centroids: list[tuple[float, float]]
    cluster_radius_m: list[float]
    tallest_building_m: float = field(default=0.0)

    def __post_init__(self):
        self.tallest_building_m = float(self.building_height_m.max(initial=0.0))


def cell_center_m(x: int, y: int, cell_size_m: float) -> tuple[float, float]:
    return ((x + 0.5) * cell_size_m, (y + 0.5) * cell_size_m)


def pos_to_cell(pos_m, config: ScenarioConfig) -> tuple[int, int]:
    x = min(config.grid_cols - 1, max(0, int(pos_m[0] / config.cell_size_m)))
    y = min(config.grid_rows - 1, max(0, int(pos_m[1] / config.cell_size_m)))
    return x, y


def place_charging_stations(config: ScenarioConfig) -> list[tuple[int, int]]:
    """Place the charging stations on a ring around the map center.

    Station k sits at the cell nearest to center + R*(cos t, sin t) with
    t = 2*pi*k/M and R = map_width/4. Nearness ties resolve toward the
    lower row-major index; an occupied cell falls through to the next
    nearest free cell in the same ordering.
    """
    m = config.num_cs
    if m == 0:
        return []
    if m > config.num_cells:
        raise ConfigError(f"cannot place {m} charging stations on {config.num_cells} cells")
    cx = config.map_width_m / 2.0
    cy = config.map_height_m / 2.0
    radius = config.map_width_m / 4.0
    centers = [
        (x, y, cell_center_m(x, y, config.cell_size_m))
        for y in range(config.grid_rows)
        for x in range(config.grid_cols)
    ]
    taken: set[tuple[int, int]] = set()
    cells = []
    for k in range(m):
        theta = 2.0 * math.pi * k / m
        px = cx + radius * math.cos(theta)
        py = cy + radius * math.sin(theta)
        ranked = sorted(
            range(len(centers)),
            key=lambda i: ((centers[i][2][0] - px) ** 2 + (centers[i][2][1] - py) ** 2, i),
        )
        for i in ranked:
            cell = (centers[i][0], centers[i][1])
            if cell not in taken:
                taken.add(cell)
                cells.append(cell)
                break
    return cells


def generate_world(config: ScenarioConfig) -> World:
    """Generate buildings, station cells, and cluster geometry from the seed."""
    config.validate()
    gen = rng.stream(config.seed, rng.STREAM_WORLD)
    cs_cells = place_charging_stations(config)

    centroids = [
        (float(gen.uniform(0.0, config.map_width_m)), float(gen.uniform(0.0, config.map_height_m)))
        for _ in range(config.num_clusters)
    ]
    lo, hi = config.cluster_radius_m
    radii = [float(gen.uniform(lo, hi)) for _ in range(config.num_clusters)]

    heights = np.zeros((config.grid_rows, config.grid_cols))
    n_obstacles = round(config.obstacle_coverage * config.num_cells)
    if n_obstacles > 0:
        excluded = set(cs_cells) | {pos_to_cell(c, config) for c in centroids}
        eligible = [
            y * config.grid_cols + x
            for y in range(config.grid_rows)
            for x in range(config.grid_cols)
            if (x, y) not in excluded
        ]
        if n_obstacles > len(eligible):
            raise ConfigError(
                f"obstacle budget infeasible after exclusions: need {n_obstacles} of "
                f"{len(eligible)} eligible cells"
            )
        chosen = gen.choice(len(eligible), size=n_obstacles, replace=False)
        # Heights are uniform on (0, max]: 1 - U[0,1) never yields 0.
        drawn = config.max_building_height_m * (1.0 - gen.random(n_obstacles))
        for idx, h in zip(chosen, drawn):
            flat = eligible[int(idx)]
            heights[flat // config.grid_cols, flat % config.grid_cols] = h
        if config.is_3d:
            # The top flight level must stay blocked somewhere: lift the
            # tallest building to the ceiling so no level clears every roof.
            ceiling = min(
                config.altitude_levels * config.level_height_m,
                config.max_building_height_m,
            )
            tallest_at = np.unravel_index(int(np.argmax(heights)), heights.shape)
            heights[tallest_at] = max(heights[tallest_at], ceiling)

    return World(
        building_height_m=heights,
        cs_cells=cs_cells,
        centroids=centroids,
        cluster_radius_m=radii,
    )


def sample_users(config: ScenarioConfig, world: World) -> list[User]:
    """Draw the user population around the cluster centroids.

    Positions are isotropic normal around the centroid with sigma equal
    to half the cluster radius, truncated to the cluster disk and the
    map; after 64 rejected draws the sample is clamped radially.
    """
    gen = rng.stream(config.seed, rng.STREAM_USERS)
    users = []
    for uid in range(config.num_users):
        cluster = int(gen.integers(config.num_clusters))
        cx, cy = world.centroids[cluster]
        radius = world.cluster_radius_m[cluster]
        sigma = radius / 2.0
        pos = None
        for _ in range(64):
            px = cx + gen.normal(0.0, sigma)
            py = cy + gen.normal(0.0, sigma)
            inside_map = 0.0 <= px <= config.map_width_m and 0.0 <= py <= config.map_height_m
            if inside_map and (px - cx) ** 2 + (py - cy) ** 2 <= radius**2:
                pos = (px, py)
                break
        if pos is None:
            px = cx + gen.normal(0.0, sigma)
            py = cy + gen.normal(0.0, sigma)
            dist = math.hypot(px - cx, py - cy)
            if dist > radius and dist > 0:
                px = cx + (px - cx) * radius / dist
                py = cy + (py - cy) * radius / dist
            px = min(config.map_width_m, max(0.0, px))
            py = min(config.map_height_m, max(0.0, py))
            pos = (px, py)

        if config.multi_service:
            service = ServiceType(int(gen.integers(3)))
        else:
            service = ServiceType.THROUGHPUT
        dlo, dhi = config.demand_range
        demand = int(gen.integers(dlo, dhi + 1))
        if config.dynamic_requests and config.p_request_arrival > 0:
            request_iter = int(gen.geometric(config.p_request_arrival)) - 1
        else:
            request_iter = 0
        users.append(
            User(
                id=uid,
                home_cluster=cluster,
                pos_m=(float(pos[0]), float(pos[1])),
                service=service,
                demand_iters=demand,
                bw_need_mhz=config.tr_bandwidth_per_user_mhz
                if service == ServiceType.THROUGHPUT
                else 0.0,
                request_iter=request_iter,
            )
        )
    return users


def generate_scenario(config: ScenarioConfig) -> tuple[World, list[User]]:
    world = generate_world(config)
    return world, sample_users(config, world)


# -- world file IO ----------------------------------------------------------


def world_to_dict(config: ScenarioConfig, world: World, users: list[User]) -> dict:
    return {
        "schema": WORLD_SCHEMA,
        "config": config.to_dict(),
        "building_height_m": [[float(h) for h in row] for row in world.building_height_m],
        "cs_cells": [list(c) for c in world.cs_cells],
        "centroids": [list(c) for c in world.centroids],
        "cluster_radius_m": list(world.cluster_radius_m),
        "tallest_building_m": world.tallest_building_m,
        "users": [
            {
                "id": u.id,
                "home_cluster": u.home_cluster,
                "pos_m": list(u.pos_m),
                "service": u.service.name,
                "demand_iters": u.demand_iters,
                "bw_need_mhz": u.bw_need_mhz,
                "request_iter": u.request_iter,
                "served_iters": u.served_iters,
                "completion_iter": u.completion_iter,
            }
            for u in users
        ],
    }


def save_world(path: str | Path, config: ScenarioConfig, world: World, users: list[User]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(world_to_dict(config, world, users), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_world(path: str | Path) -> tuple[ScenarioConfig, World, list[User]]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema") != WORLD_SCHEMA:
        raise ValueError(f"not a {WORLD_SCHEMA} document: {path}")
    config = ScenarioConfig.from_dict(doc["config"])
    world = World(
        building_height_m=np.array(doc["building_height_m"], dtype=float),
        cs_cells=[tuple(c) for c in doc["cs_cells"]],
        centroids=[tuple(c) for c in doc["centroids"]],
        cluster_radius_m=list(doc["cluster_radius_m"]),
    )
    users = [
        User(
            id=u["id"],
            home_cluster=u["home_cluster"],
            pos_m=tuple(u["pos_m"]),
            service=ServiceType[u["service"]],
            demand_iters=u["demand_iters"],
            bw_need_mhz=u["bw_need_mhz"],
            request_iter=u["request_iter"],
            served_iters=u["served_iters"],
            completion_iter=u["completion_iter"],
        )
        for u in doc["users"]
    ]
    return config, world, users

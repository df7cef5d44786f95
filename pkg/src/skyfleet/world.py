"""Geometry and motion services over a generated scene.

Cells are (x, y, z) integer triples: x is the column, y the row, z the
altitude level (always 0 in 2D). Altitude levels are uniform bands of
``level_height_m``; a cell-level is blocked when the building top
reaches the band's upper edge.
"""

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .scenario import User, World, cell_center_m

Cell = tuple[int, int, int]

# Unit moves in expansion order; the order fixes A* tie-breaking.
MOVE_ORDER = (
    (0, 1, 0),  # forward (+y)
    (0, -1, 0),  # backward
    (1, 0, 0),  # right (+x)
    (-1, 0, 0),  # left
    (0, 0, 1),  # up
    (0, 0, -1),  # down
)


class UnreachableError(RuntimeError):
    """No path exists between the requested cells."""


def in_bounds(cell: Cell, config: ScenarioConfig) -> bool:
    x, y, z = cell
    return 0 <= x < config.grid_cols and 0 <= y < config.grid_rows and 0 <= z < config.altitude_levels


def is_blocked(cell: Cell, world: World, config: ScenarioConfig) -> bool:
    """Whether a building occupies the full altitude band of the cell.

    2D flight happens above the tallest building, so nothing blocks.
    """
    if not in_bounds(cell, config):
        raise ValueError(f"cell {cell} out of bounds")
    if not config.is_3d:
        return False
    x, y, z = cell
    return world.building_height_m[y, x] >= (z + 1) * config.level_height_m


def users_in_footprint(
    uav_cell: Cell, users: list[User], footprint_radius_m: float, cell_size_m: float
) -> list[User]:
    """Users whose position lies within the closed footprint disk.

    Coverage is horizontal only; altitude never affects membership.
    """
    ax, ay = cell_center_m(uav_cell[0], uav_cell[1], cell_size_m)
    r2 = footprint_radius_m**2
    return [u for u in users if (u.pos_m[0] - ax) ** 2 + (u.pos_m[1] - ay) ** 2 <= r2]


# -- transit kinematics -------------------------------------------------------


@dataclass(frozen=True)
class KinematicLimits:
    """Speed/acceleration caps plus the derived per-cell cruise speed."""

    v_max_mps: float
    a_max_mps2: float
    v_cruise_mps: float

    @classmethod
    def for_config(cls, config: ScenarioConfig) -> "KinematicLimits":
        """Derive the cruise speed that makes one cell transit take one iteration.

        Solves t = d/v + v/a = T for the smaller root, with d the cell
        size and T the iteration length; capped at the speed limit.
        """
        a = config.max_accel_mps2
        d = config.cell_size_m
        t = config.iteration_seconds
        disc = (t * a / 2.0) ** 2 - a * d
        if disc < 0:
            v = config.max_speed_mps  # one iteration per cell is infeasible
        else:
            v = t * a / 2.0 - math.sqrt(disc)
        v = min(v, config.max_speed_mps)
        return cls(v_max_mps=config.max_speed_mps, a_max_mps2=config.max_accel_mps2, v_cruise_mps=v)


def transit_time(distance_m: float, limits: KinematicLimits) -> float:
    """Seconds to cover a distance under a trapezoidal speed profile.

    Ramps at max acceleration to the cruise speed, coasts, and ramps
    down; short hops that never reach cruise speed use the triangular
    profile instead.
    """
    if distance_m < 0:
        raise ValueError(f"distance must be non-negative, got {distance_m}")
    if distance_m == 0:
        return 0.0
    v, a = limits.v_cruise_mps, limits.a_max_mps2
    if distance_m >= v * v / a:
        return distance_m / v + v / a
    return 2.0 * math.sqrt(distance_m / a)


# -- pathfinding ---------------------------------------------------------------


def _neighbors(cell: Cell, world: World, config: ScenarioConfig, ignore_obstacles: bool):
    x, y, z = cell
    for dx, dy, dz in MOVE_ORDER:
        nxt = (x + dx, y + dy, z + dz)
        if not in_bounds(nxt, config):
            continue
        if not ignore_obstacles and is_blocked(nxt, world, config):
            continue
        yield nxt


def astar_path(
    start: Cell,
    goal: Cell,
    world: World,
    config: ScenarioConfig,
    ignore_obstacles: bool = False,
) -> list[Cell]:
    """Minimum-move path from start to goal, excluding the start cell.

    Unit cost per move (4-connected plus up/down), L1 heuristic
    including altitude, ties broken by move order then insertion order.
    Returns [] when start == goal; raises UnreachableError otherwise
    when no path exists.
    """
    if start == goal:
        return []

    def h(c: Cell) -> int:
        return abs(c[0] - goal[0]) + abs(c[1] - goal[1]) + abs(c[2] - goal[2])

    counter = 0
    open_heap = [(h(start), 0, start)]
    g_score = {start: 0}
    came_from: dict[Cell, Cell] = {}
    closed: set[Cell] = set()
    while open_heap:
        _, _, current = heapq.heappop(open_heap)
        if current == goal:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return path[1:]
        if current in closed:
            continue
        closed.add(current)
        g = g_score[current]
        for nxt in _neighbors(current, world, config, ignore_obstacles):
            tentative = g + 1
            if tentative < g_score.get(nxt, 1 << 30):
                g_score[nxt] = tentative
                came_from[nxt] = current
                counter += 1
                heapq.heappush(open_heap, (tentative + h(nxt), counter, nxt))
    raise UnreachableError(f"no path from {start} to {goal}")


class CsDistanceField:
    """Move distance from every cell to its nearest charging station.

    One multi-source breadth-first sweep per world replaces a per-query
    search: unit costs make the BFS distance equal to the shortest path
    length. Charging happens at ground level, so sources are the station
    cells at z = 0.
    """

    def __init__(self, world: World, config: ScenarioConfig, ignore_obstacles: bool = False):
        shape = (config.altitude_levels, config.grid_rows, config.grid_cols)
        self.distance = np.full(shape, -1, dtype=np.int32)
        self.nearest_cs = np.full(shape, -1, dtype=np.int32)
        self._config = config
        queue = deque()
        for idx, (x, y) in enumerate(world.cs_cells):
            if not ignore_obstacles and is_blocked((x, y, 0), world, config):
                continue  # cannot happen for generated worlds (stations stay clear)
            self.distance[0, y, x] = 0
            self.nearest_cs[0, y, x] = idx
            queue.append((x, y, 0))
        while queue:
            cell = queue.popleft()
            x, y, z = cell
            d = self.distance[z, y, x]
            src = self.nearest_cs[z, y, x]
            for nx, ny, nz in _neighbors(cell, world, config, ignore_obstacles):
                if self.distance[nz, ny, nx] < 0:
                    self.distance[nz, ny, nx] = d + 1
                    self.nearest_cs[nz, ny, nx] = src
                    queue.append((nx, ny, nz))

    def moves_to_cs(self, cell: Cell) -> int:
        """Path length in moves, or -1 when every station is unreachable."""
        x, y, z = cell
        return int(self.distance[z, y, x])

    def nearest_cs_index(self, cell: Cell) -> int:
        x, y, z = cell
        return int(self.nearest_cs[z, y, x])

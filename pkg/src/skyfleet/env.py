"""The multi-agent decision process.

One env instance owns the mutable mission state: agent cells, batteries
and modes, user request bookkeeping, and the iteration clock. ``step``
advances one iteration (one minute): it resolves actions in agent id
order, charges batteries, provisions services, computes rewards, and
applies user dynamics. Instances are single-threaded; distinct seeded
instances are independent.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

from . import rng
from .config import ScenarioConfig
from .rewards import coverage_reward, energy_aware_reward, multi_service_reward
from .scenario import ServiceType, User, World, cell_center_m, pos_to_cell
from .world import Cell, CsDistanceField, UnreachableError, astar_path, is_blocked

logger = logging.getLogger(__name__)

CHARGE_RATE_MIN = 10  # minutes of autonomy restored per charge action


class ActionId(IntEnum):
    FORWARD = 0  # +y
    BACKWARD = 1  # -y
    RIGHT = 2  # +x
    LEFT = 3  # -x
    HOVER = 4
    UP = 5  # +z, 3D only
    DOWN = 6  # -z, 3D only
    GOTO_CS = 7  # battery-limited only
    CHARGE = 8  # battery-limited only


_MOVE_DELTAS = {
    ActionId.FORWARD: (0, 1, 0),
    ActionId.BACKWARD: (0, -1, 0),
    ActionId.RIGHT: (1, 0, 0),
    ActionId.LEFT: (-1, 0, 0),
    ActionId.HOVER: (0, 0, 0),
    ActionId.UP: (0, 0, 1),
    ActionId.DOWN: (0, 0, -1),
}


def valid_action_ids(config: ScenarioConfig) -> tuple[ActionId, ...]:
    """The ordered action set for a configuration.

    Vertical moves exist only in 3D; the charging pair only with a
    limited battery. Action integers used by tables, traces, and the
    serve protocol are indices into this tuple.
    """
    ids = [ActionId.FORWARD, ActionId.BACKWARD, ActionId.RIGHT, ActionId.LEFT, ActionId.HOVER]
    if config.is_3d:
        ids += [ActionId.UP, ActionId.DOWN]
    if config.battery_limited:
        ids += [ActionId.GOTO_CS, ActionId.CHARGE]
    return tuple(ids)


class Mode(Enum):
    FLYING = "FLYING"
    TO_CS = "TO_CS"
    CHARGING = "CHARGING"
    CRASHED = "CRASHED"


@dataclass
class UavAgent:
    id: int
    cell: Cell
    battery_min: int
    mode: Mode = Mode.FLYING
    committed_path: list[Cell] = field(default_factory=list)
    bandwidth_mhz: float = 0.0
    obstacle_immune: bool = False
    last_obs: int = 0


class StateCodec:
    """Packs (x, y, z, battery bin) into one table index and back.

    The battery dimension exists only in battery-limited runs; it has
    five bins delimited by the reward thresholds c1..c4, bin 0 being the
    healthiest.
    """

    def __init__(self, config: ScenarioConfig):
        self._cols = config.grid_cols
        self._rows = config.grid_rows
        self._levels = config.altitude_levels
        self._bins = config.battery_bins
        self._params = config.reward_params
        self.representation = config.state_representation
        self.n_states = self._cols * self._rows * self._levels * self._bins

    def battery_bin(self, battery_min: float) -> int:
        if self._bins == 1:
            return 0
        p = self._params
        if battery_min > p.c1:
            return 0
        if battery_min > p.c2:
            return 1
        if battery_min > p.c3:
            return 2
        if battery_min > p.c4:
            return 3
        return 4

    def pack(self, x: int, y: int, z: int = 0, battery_bin: int = 0) -> int:
        return ((battery_bin * self._levels + z) * self._rows + y) * self._cols + x

    def unpack(self, index: int) -> tuple[int, int, int, int]:
        x = index % self._cols
        index //= self._cols
        y = index % self._rows
        index //= self._rows
        z = index % self._levels
        return x, y, z, index // self._levels


@dataclass
class ServiceStats:
    """Coverage accounting for one iteration."""

    covered_ids: list[int]
    per_agent_covered: list[int]
    # per agent: covered counts split by (throughput, edge, gathering)
    per_agent_service: list[tuple[int, int, int]]

    @property
    def covered_total(self) -> int:
        return len(self.covered_ids)


@dataclass
class StepOutcome:
    obs: list[int]
    rewards: list[float]
    credited_actions: list[int | None]  # column credited for learning
    crashed: list[bool]  # crashed as of the end of this step
    crashed_now: list[bool]  # crashed during this step
    forced_next: list[int | None]  # column forced next step, None if free
    charge_added: list[int]
    battery_cost: list[int]
    stats: ServiceStats
    iteration: int
    epoch_done: bool


class _UserTable:
    """Columnar view of the user population for the step hot path."""

    def __init__(self, users: list[User], world: World):
        n = len(users)
        self.n = n
        self.pos = np.array([u.pos_m for u in users], dtype=float).reshape(n, 2)
        self.service = np.array([int(u.service) for u in users], dtype=np.int8)
        self.demand = np.array([u.demand_iters for u in users], dtype=np.int64)
        self.served = np.array([u.served_iters for u in users], dtype=np.int64)
        self.request = np.array([u.request_iter for u in users], dtype=np.int64)
        self.completion = np.array(
            [-1 if u.completion_iter is None else u.completion_iter for u in users],
            dtype=np.int64,
        )
        self.bw_need = np.array([u.bw_need_mhz for u in users], dtype=float)
        self.home_cluster = np.array([u.home_cluster for u in users], dtype=np.int64)
        self.centroid = np.array(
            [world.centroids[c] for c in self.home_cluster], dtype=float
        ).reshape(n, 2)
        self.radius = np.array(
            [world.cluster_radius_m[c] for c in self.home_cluster], dtype=float
        )

    def rearm_all(self, request_iter: int) -> None:
        self.served[:] = 0
        self.completion[:] = -1
        self.request[:] = request_iter


class UavEnv:
    """Seedable mission environment for one (world, config) pair."""

    def __init__(
        self,
        world: World,
        users: list[User],
        config: ScenarioConfig,
        baseline_mode: bool = False,
    ):
        config.validate()
        self.config = config
        self.world = world
        self.codec = StateCodec(config)
        self.action_ids = valid_action_ids(config)
        self.n_actions = len(self.action_ids)
        self.n_states = self.codec.n_states
        self.n_agents = config.num_uavs
        self._column = {aid: i for i, aid in enumerate(self.action_ids)}
        self._baseline_mode = baseline_mode
        self._cs_set = set(world.cs_cells)
        self._cs_field = CsDistanceField(world, config) if config.num_cs else None
        self._cs_field_free = (
            CsDistanceField(world, config, ignore_obstacles=True)
            if config.num_cs and baseline_mode
            else None
        )
        self.users = _UserTable(users, world)
        self.service_totals = [int((self.users.service == s).sum()) for s in range(3)]
        self._noise = rng.stream(config.seed, rng.STREAM_NOISE)
        self._dynamics = rng.stream(config.seed, rng.STREAM_DYNAMICS)
        self.static = not (config.dynamic_requests or config.users_move)
        self.now = 0  # global iterations taken
        self.epoch = 0
        self.crashes = 0
        self.agents: list[UavAgent] = []
        self._start_cells = self._compute_start_cells()
        self._warned: set[str] = set()

    # -- setup ----------------------------------------------------------------

    def _compute_start_cells(self) -> list[Cell]:
        cfg = self.config
        cx = cfg.map_width_m / 2.0
        cy = cfg.map_height_m / 2.0
        ranked = []
        for y in range(cfg.grid_rows):
            for x in range(cfg.grid_cols):
                if not self._baseline_mode and is_blocked((x, y, 0), self.world, cfg):
                    continue
                px, py = cell_center_m(x, y, cfg.cell_size_m)
                ranked.append(((px - cx) ** 2 + (py - cy) ** 2, y * cfg.grid_cols + x, (x, y, 0)))
        ranked.sort()
        if len(ranked) < cfg.num_uavs:
            raise ValueError("not enough free cells to place all agents")
        return [cell for _, _, cell in ranked[: cfg.num_uavs]]

    def _fresh_agents(self) -> list[UavAgent]:
        return [
            UavAgent(
                id=i,
                cell=self._start_cells[i],
                battery_min=self.config.battery_minutes,
                bandwidth_mhz=self.config.bandwidth_mhz,
                obstacle_immune=self._baseline_mode,
            )
            for i in range(self.n_agents)
        ]

    # -- observation ----------------------------------------------------------

    def observe(self, agent: UavAgent) -> int:
        """Pack the agent's state; position noise corrupts only the report.

        Each horizontal axis independently shifts by one cell with
        probability p_obs_error, clamped to the map.
        """
        x, y, z = agent.cell
        if self.config.position_noise:
            p = self.config.p_obs_error
            if self._noise.random() < p:
                x += 1 if self._noise.random() < 0.5 else -1
                x = min(self.config.grid_cols - 1, max(0, x))
            if self._noise.random() < p:
                y += 1 if self._noise.random() < 0.5 else -1
                y = min(self.config.grid_rows - 1, max(0, y))
        obs = self.codec.pack(x, y, z, self.codec.battery_bin(agent.battery_min))
        agent.last_obs = obs
        return obs

    def _observations(self) -> list[int]:
        return [a.last_obs if a.mode is Mode.CRASHED else self.observe(a) for a in self.agents]

    # -- episode control --------------------------------------------------------

    def reset(self, epoch: int = 0) -> list[int]:
        """Start an epoch.

        Static scenarios restart from scratch: agents return to their
        spawn cells with full batteries and every user request re-arms
        at the current iteration. Dynamic scenarios persist; only
        crashed agents are revived, with a full battery at their nearest
        station.
        """
        self.epoch = epoch
        if self.static or not self.agents:
            self.agents = self._fresh_agents()
            if self.static:
                self.users.rearm_all(self.now)
        else:
            for agent in self.agents:
                if agent.mode is Mode.CRASHED:
                    agent.cell = self._revival_cell(agent)
                    agent.battery_min = self.config.battery_minutes
                    agent.mode = Mode.FLYING
                    agent.committed_path = []
        return self._observations()

    def _revival_cell(self, agent: UavAgent) -> Cell:
        if not self.world.cs_cells:
            return self._start_cells[agent.id]
        idx = self._field(agent).nearest_cs_index(agent.cell)
        if idx < 0:
            idx = 0
        x, y = self.world.cs_cells[idx]
        return (x, y, 0)

    def action_column(self, action: ActionId) -> int:
        """Column index of a canonical action within this configuration."""
        return self._column[action]

    def forced_actions(self) -> list[int | None]:
        """Per-agent action column the committed mode forces, None if free."""
        forced: list[int | None] = [None] * self.n_agents
        for agent in self.agents:
            if agent.mode is Mode.TO_CS:
                forced[agent.id] = self._column[ActionId.GOTO_CS]
            elif agent.mode is Mode.CHARGING:
                forced[agent.id] = self._column[ActionId.CHARGE]
        return forced

    # -- helpers ----------------------------------------------------------------

    def _field(self, agent: UavAgent) -> CsDistanceField:
        return self._cs_field_free if agent.obstacle_immune else self._cs_field

    def _on_cs(self, agent: UavAgent) -> bool:
        x, y, z = agent.cell
        return z == 0 and (x, y) in self._cs_set

    def needed_battery(self, agent: UavAgent) -> int:
        """Minutes of battery the trip to the nearest station takes.

        Walled-off agents get battery + 1, which pins the reward into
        the full charge-cost regime.
        """
        if self._cs_field is None:
            return 0
        moves = self._field(agent).moves_to_cs(agent.cell)
        return self.config.battery_minutes + 1 if moves < 0 else moves

    def _warn_once(self, key: str, message: str) -> None:
        if key not in self._warned:
            self._warned.add(key)
            logger.warning("%s (further occurrences logged at DEBUG)", message)
        else:
            logger.debug(message)

    def _crash(self, agent: UavAgent) -> None:
        agent.mode = Mode.CRASHED
        agent.committed_path = []
        self.crashes += 1

    # -- the iteration ------------------------------------------------------------

    def step(self, actions) -> StepOutcome:
        """Advance one iteration given one action per agent.

        Crashed agents may pass None. Agents traveling to a station or
        charging have their submitted action overridden by the committed
        one.
        """
        cfg = self.config
        n = self.n_agents
        if len(actions) != n:
            raise ValueError(f"expected {n} actions, got {len(actions)}")
        credited: list[int | None] = [None] * n
        crashed_now = [False] * n
        charge_added = [0] * n
        battery_cost = [0] * n

        for agent in self.agents:
            if agent.mode is Mode.CRASHED:
                continue
            i = agent.id
            if agent.mode is Mode.TO_CS:
                action = ActionId.GOTO_CS
            elif agent.mode is Mode.CHARGING:
                action = ActionId.CHARGE
            else:
                a = actions[i]
                if a is None or not (0 <= a < self.n_actions):
                    self._warn_once(
                        "bad-action",
                        f"agent {i}: action {a!r} outside the action set, hovering",
                    )
                    action = ActionId.HOVER
                else:
                    action = self.action_ids[a]
            credited[i] = self._column[action]

            charging_step = False
            if action is ActionId.GOTO_CS and agent.mode is Mode.FLYING:
                charging_step = self._begin_goto_cs(agent)
            elif action is ActionId.GOTO_CS:  # committed transit
                agent.cell = agent.committed_path.pop(0)
                if not agent.committed_path:
                    agent.mode = Mode.CHARGING
            elif action is ActionId.CHARGE:
                if self._on_cs(agent):
                    charging_step = True
                else:
                    self._warn_once(
                        "charge-off-cs",
                        f"agent {i}: CHARGE away from a charging station, hovering",
                    )
            else:
                if self._apply_move(agent, action):
                    crashed_now[i] = True
                    continue

            if charging_step:
                agent.mode = Mode.CHARGING
                added = min(CHARGE_RATE_MIN, cfg.battery_minutes - agent.battery_min)
                agent.battery_min += added
                charge_added[i] = added
                if agent.battery_min >= cfg.battery_minutes:
                    agent.mode = Mode.FLYING  # fully recharged, leaves next step
            elif cfg.battery_limited:
                if agent.battery_min <= 0:
                    self._crash(agent)  # nothing left to spend
                    crashed_now[i] = True
                    continue
                agent.battery_min -= 1
                battery_cost[i] = 1
                if agent.battery_min == 0 and not self._on_cs(agent):
                    self._crash(agent)
                    crashed_now[i] = True

        stats = self._provision_services()
        rewards = self._compute_rewards(stats, crashed_now)
        self._update_users()
        self.now += 1
        epoch_done = self.now % cfg.epoch_iterations == 0

        return StepOutcome(
            obs=self._observations(),
            rewards=rewards,
            credited_actions=credited,
            crashed=[a.mode is Mode.CRASHED for a in self.agents],
            crashed_now=crashed_now,
            forced_next=self.forced_actions(),
            charge_added=charge_added,
            battery_cost=battery_cost,
            stats=stats,
            iteration=self.now,
            epoch_done=epoch_done,
        )

    def _apply_move(self, agent: UavAgent, action: ActionId) -> bool:
        """Move one cell; returns True when the move crashes the agent.

        Off-map targets degrade to hovering; a building band blocks the
        target cell only in 3D and only for non-immune agents.
        """
        dx, dy, dz = _MOVE_DELTAS[action]
        if dx == 0 and dy == 0 and dz == 0:
            return False
        x, y, z = agent.cell
        target = (x + dx, y + dy, z + dz)
        cfg = self.config
        if not (
            0 <= target[0] < cfg.grid_cols
            and 0 <= target[1] < cfg.grid_rows
            and 0 <= target[2] < cfg.altitude_levels
        ):
            return False
        if not agent.obstacle_immune and is_blocked(target, self.world, cfg):
            self._crash(agent)
            return True
        agent.cell = target
        return False

    def _begin_goto_cs(self, agent: UavAgent) -> bool:
        """Commit to the nearest station; returns True when already there."""
        if self._cs_field is None:
            self._warn_once("no-cs", f"agent {agent.id}: GOTO_CS without stations, hovering")
            return False
        idx = self._field(agent).nearest_cs_index(agent.cell)
        if idx < 0:
            self._warn_once(
                "cs-unreachable", f"agent {agent.id}: every charging station unreachable, hovering"
            )
            return False
        cx, cy = self.world.cs_cells[idx]
        try:
            path = astar_path(
                agent.cell, (cx, cy, 0), self.world, self.config, agent.obstacle_immune
            )
        except UnreachableError:
            self._warn_once(
                "cs-unreachable", f"agent {agent.id}: every charging station unreachable, hovering"
            )
            return False
        if not path:
            return True  # already on the station: this action charges
        agent.mode = Mode.TO_CS
        agent.committed_path = path
        agent.cell = agent.committed_path.pop(0)
        if not agent.committed_path:
            agent.mode = Mode.CHARGING
        return False

    # -- services and rewards -------------------------------------------------------

    def _provision_services(self) -> ServiceStats:
        """Cover users under flying footprints and advance active requests.

        Each user counts for one agent at most (lowest id wins). Under a
        bandwidth cap, users requesting throughput are admitted in id
        order until the next admission would exceed the cap; the ones
        left out are not covered. Agents heading to or occupying a
        station serve nobody.
        """
        cfg = self.config
        ut = self.users
        claimed = np.zeros(ut.n, dtype=bool)
        per_agent_covered = [0] * self.n_agents
        per_agent_service = [(0, 0, 0)] * self.n_agents
        r2 = cfg.footprint_radius_m**2
        for agent in self.agents:
            if agent.mode is not Mode.FLYING:
                continue
            ax, ay = cell_center_m(agent.cell[0], agent.cell[1], cfg.cell_size_m)
            dx = ut.pos[:, 0] - ax
            dy = ut.pos[:, 1] - ay
            inside = (dx * dx + dy * dy <= r2) & ~claimed
            if not inside.any():
                continue
            active = inside & (ut.request <= self.now) & (ut.served < ut.demand)
            covered = inside.copy()
            if cfg.bandwidth_limited:
                budget = agent.bandwidth_mhz
                spent = 0.0
                for uid in np.nonzero(active & (ut.service == ServiceType.THROUGHPUT))[0]:
                    spent += ut.bw_need[uid]
                    if spent > budget:
                        # admission stops at the first user over the cap
                        over = active & (ut.service == ServiceType.THROUGHPUT)
                        over[: int(uid)] = False
                        covered &= ~over
                        active &= ~over
                        break
            served_ids = np.nonzero(active & covered)[0]
            ut.served[served_ids] += 1
            done = served_ids[ut.served[served_ids] >= ut.demand[served_ids]]
            ut.completion[done] = self.now
            claimed |= covered
            counts = [0, 0, 0]
            for s in range(3):
                counts[s] = int((covered & (ut.service == s)).sum())
            per_agent_covered[agent.id] = int(covered.sum())
            per_agent_service[agent.id] = tuple(counts)
        return ServiceStats(
            covered_ids=[int(i) for i in np.nonzero(claimed)[0]],
            per_agent_covered=per_agent_covered,
            per_agent_service=per_agent_service,
        )

    def _compute_rewards(self, stats: ServiceStats, crashed_now: list[bool]) -> list[float]:
        cfg = self.config
        rewards = [0.0] * self.n_agents
        for agent in self.agents:
            i = agent.id
            if agent.mode is Mode.CRASHED or crashed_now[i]:
                continue  # crashed agents emit zero from the crash step on
            r_u = coverage_reward(stats.per_agent_covered[i], cfg.num_users, cfg.num_uavs)
            if not cfg.battery_limited:
                rewards[i] = r_u
                continue
            n_b = self.needed_battery(agent)
            if cfg.multi_service:
                fracs = []
                for s in range(3):
                    total = self.service_totals[s]
                    if total == 0:
                        fracs.append(0.0)
                    else:
                        share = stats.per_agent_service[i][s] / (total / cfg.num_uavs)
                        fracs.append(min(1.0, share))
                rewards[i] = multi_service_reward(
                    agent.battery_min,
                    n_b,
                    r_u,
                    *fracs,
                    cfg.reward_params,
                    cfg.eq34_typo_fix,
                )
            else:
                rewards[i] = energy_aware_reward(
                    agent.battery_min, n_b, r_u, cfg.reward_params, cfg.eq34_typo_fix
                )
        return rewards

    # -- user dynamics ------------------------------------------------------------

    def _update_users(self) -> None:
        """Random-walk moving users and re-arm completed dynamic requests."""
        cfg = self.config
        ut = self.users
        gen = self._dynamics
        if cfg.users_move:
            for uid in range(ut.n):
                if gen.random() >= cfg.p_user_move:
                    continue
                cx_cell, cy_cell = pos_to_cell(ut.pos[uid], cfg)
                dx, dy = ((0, 1), (0, -1), (1, 0), (-1, 0))[int(gen.integers(4))]
                nx, ny = cx_cell + dx, cy_cell + dy
                if not (0 <= nx < cfg.grid_cols and 0 <= ny < cfg.grid_rows):
                    continue
                px, py = cell_center_m(nx, ny, cfg.cell_size_m)
                ddx = px - ut.centroid[uid, 0]
                ddy = py - ut.centroid[uid, 1]
                if ddx * ddx + ddy * ddy > ut.radius[uid] ** 2:
                    continue
                ut.pos[uid, 0] = px
                ut.pos[uid, 1] = py
        if cfg.dynamic_requests:
            for uid in range(ut.n):
                if ut.served[uid] < ut.demand[uid]:
                    continue
                if gen.random() < cfg.p_request_arrival:
                    dlo, dhi = cfg.demand_range
                    ut.demand[uid] = int(gen.integers(dlo, dhi + 1))
                    ut.served[uid] = 0
                    ut.completion[uid] = -1
                    ut.request[uid] = self.now


def trace_record(env: UavEnv, outcome: StepOutcome) -> dict:
    """One JSONL trace line: iteration, per-agent state, covered users."""
    agents = []
    for agent in env.agents:
        i = agent.id
        col = outcome.credited_actions[i]
        x, y, z, _ = env.codec.unpack(agent.last_obs)
        agents.append(
            {
                "cell": list(agent.cell),
                "obs_cell": [x, y, z],
                "action": env.action_ids[col].name if col is not None else None,
                "reward": outcome.rewards[i],
                "battery": agent.battery_min,
                "mode": agent.mode.value,
                "path": [list(c) for c in agent.committed_path],
            }
        )
    return {
        "iteration": outcome.iteration - 1,
        "agents": agents,
        "covered_users": outcome.stats.covered_ids,
    }

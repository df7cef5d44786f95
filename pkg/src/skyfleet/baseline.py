"""The scripted, non-learning reference behaviour.

Drone k patrols by role k mod 3: a square ring two cells in from the map
edge, a column sweep, or a row sweep. Whenever the battery drops to 15%
of capacity the drone heads for the nearest charging station (the
environment manages the committed path). In 3D the patrol flies at the
top altitude level with the building ceiling lifted, so it never
collides; battery is its only risk.
"""

import math
from enum import IntEnum

from .config import ScenarioConfig
from .env import ActionId, Mode, UavAgent, UavEnv


class BaselineRole(IntEnum):
    SQUARE = 0
    Y_SWEEP = 1
    X_SWEEP = 2


def ring_cycle(config: ScenarioConfig) -> list[tuple[int, int]]:
    """Clockwise cycle over the margin-2 ring, starting at its top-left corner.

    Degenerates to the single center cell on grids too small to hold the
    ring.
    """
    lo = 2
    hi_x = config.grid_cols - 3
    hi_y = config.grid_rows - 3
    if hi_x <= lo or hi_y <= lo:
        return [(max(0, config.grid_cols // 2), max(0, config.grid_rows // 2))]
    cells = [(x, lo) for x in range(lo, hi_x + 1)]
    cells += [(hi_x, y) for y in range(lo + 1, hi_y + 1)]
    cells += [(x, hi_y) for x in range(hi_x - 1, lo - 1, -1)]
    cells += [(lo, y) for y in range(hi_y - 1, lo, -1)]
    return cells


class BaselinePolicy:
    """Deterministic patrol policy over one environment."""

    def __init__(self, env: UavEnv):
        self.env = env
        config = env.config
        self.return_threshold = math.ceil(0.15 * config.battery_minutes)
        self.ring = ring_cycle(config)
        self.ring_index = {cell: i for i, cell in enumerate(self.ring)}
        # Sweep anchors and directions are pinned at spawn and persist.
        self._anchor: dict[int, tuple[int, int]] = {}
        self._direction: dict[int, int] = {}

    def role_of(self, agent_id: int) -> BaselineRole:
        return BaselineRole(agent_id % 3)

    def action(self, agent: UavAgent) -> int:
        """Action column for one agent; callers skip crashed agents."""
        env = self.env
        config = env.config
        if agent.id not in self._anchor:
            self._anchor[agent.id] = (agent.cell[0], agent.cell[1])
            self._direction[agent.id] = 1
        if (
            config.battery_limited
            and agent.mode is Mode.FLYING
            and agent.battery_min <= self.return_threshold
        ):
            return env.action_column(ActionId.GOTO_CS)
        if config.is_3d and agent.cell[2] < config.altitude_levels - 1:
            return env.action_column(ActionId.UP)
        role = self.role_of(agent.id)
        if role is BaselineRole.SQUARE:
            return self._square_action(agent)
        if role is BaselineRole.Y_SWEEP:
            return self._sweep_action(agent, axis=1)
        return self._sweep_action(agent, axis=0)

    def _square_action(self, agent: UavAgent) -> int:
        x, y = agent.cell[0], agent.cell[1]
        if (x, y) in self.ring_index:
            nxt = self.ring[(self.ring_index[(x, y)] + 1) % len(self.ring)]
            return self._toward(agent, nxt)
        target = min(
            self.ring,
            key=lambda c: ((c[0] - x) ** 2 + (c[1] - y) ** 2, c[1] * self.env.config.grid_cols + c[0]),
        )
        return self._toward(agent, target)

    def _sweep_action(self, agent: UavAgent, axis: int) -> int:
        """Ping-pong along one axis at the spawn column (axis 1) or row (axis 0)."""
        env = self.env
        x, y = agent.cell[0], agent.cell[1]
        anchor = self._anchor[agent.id]
        if axis == 1 and x != anchor[0]:
            return self._toward(agent, (anchor[0], y))
        if axis == 0 and y != anchor[1]:
            return self._toward(agent, (x, anchor[1]))
        limit = env.config.grid_rows - 1 if axis == 1 else env.config.grid_cols - 1
        pos = y if axis == 1 else x
        direction = self._direction[agent.id]
        if pos + direction < 0 or pos + direction > limit:
            direction = -direction
            self._direction[agent.id] = direction
        if axis == 1:
            return env.action_column(ActionId.FORWARD if direction > 0 else ActionId.BACKWARD)
        return env.action_column(ActionId.RIGHT if direction > 0 else ActionId.LEFT)

    def _toward(self, agent: UavAgent, target: tuple[int, int]) -> int:
        env = self.env
        x, y = agent.cell[0], agent.cell[1]
        if x < target[0]:
            return env.action_column(ActionId.RIGHT)
        if x > target[0]:
            return env.action_column(ActionId.LEFT)
        if y < target[1]:
            return env.action_column(ActionId.FORWARD)
        if y > target[1]:
            return env.action_column(ActionId.BACKWARD)
        return env.action_column(ActionId.HOVER)


def run_baseline(world, users, config: ScenarioConfig, epochs: int, trace: str = "none"):
    """Roll the baseline out for the requested number of evaluation epochs."""
    from .env import trace_record
    from .learn import RunResult, _EpochRecorder, _want_trace

    env = UavEnv(world, users, config, baseline_mode=True)
    policy = BaselinePolicy(env)
    reports = []
    traced: list[dict] = []
    for epoch in range(epochs):
        env.reset(epoch)
        recorder = _EpochRecorder(env)
        tracing = _want_trace(trace, epoch, epochs)
        for _ in range(config.epoch_iterations):
            actions = [
                None if a.mode is Mode.CRASHED else policy.action(a) for a in env.agents
            ]
            out = env.step(actions)
            recorder.record(out)
            if tracing:
                traced.append(trace_record(env, out))
        reports.append(recorder.report(epoch, None))
    return RunResult(qtables=None, reports=reports, trace=traced)

"""Line-delimited JSON session over stdio.

One request per line, one reply per line. ``reset`` (re)builds the
scenario from the given seed and starts a fresh episode; ``step``
forwards actions; ``spec`` reports the table dimensions; ``close`` ends
the session. Malformed input never kills the session: the reply is an
error object and the loop continues.
"""

import dataclasses
import json

from .config import ScenarioConfig
from .env import UavEnv
from .scenario import generate_scenario


def _spec_reply(config: ScenarioConfig) -> dict:
    from .env import StateCodec, valid_action_ids

    codec = StateCodec(config)
    n_actions = len(valid_action_ids(config))
    return {
        "n_states": codec.n_states,
        "n_actions": n_actions,
        "valid_actions": [list(range(n_actions)) for _ in range(config.num_uavs)],
    }


class ServeSession:
    """Request dispatcher; one environment at a time."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.seed = config.seed
        self.env: UavEnv | None = None
        self.coverage: list[int] = []

    def handle(self, line: str) -> tuple[dict, bool]:
        """Returns (reply, keep_going)."""
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            return {"error": f"malformed json: {exc.msg}"}, True
        if not isinstance(msg, dict) or "cmd" not in msg:
            return {"error": "expected an object with a 'cmd' field"}, True
        cmd = msg["cmd"]
        if cmd == "close":
            return {"ok": True}, False
        if cmd == "spec":
            return _spec_reply(self.config), True
        if cmd == "reset":
            return self._reset(msg), True
        if cmd == "step":
            return self._step(msg), True
        return {"error": f"unknown cmd {cmd!r}"}, True

    def _reset(self, msg: dict) -> dict:
        seed = msg.get("seed", self.seed)
        if not isinstance(seed, int):
            return {"error": "seed must be an integer"}
        self.seed = seed
        config = dataclasses.replace(self.config, seed=seed)
        world, users = generate_scenario(config)
        self.env = UavEnv(world, users, config)
        obs = self.env.reset(0)
        self.coverage = []
        return {"obs": obs, "n_agents": self.env.n_agents}

    def _step(self, msg: dict) -> dict:
        if self.env is None:
            return {"error": "step before reset"}
        actions = msg.get("actions")
        if not isinstance(actions, list) or len(actions) != self.env.n_agents:
            return {"error": f"expected {self.env.n_agents} actions"}
        if not all(a is None or isinstance(a, int) for a in actions):
            return {"error": "actions must be integers"}
        if self.env.now % self.env.config.epoch_iterations == 0:
            self.coverage = []  # new epoch window
        out = self.env.step(actions)
        self.coverage.append(out.stats.covered_total)
        qoe3 = 100.0 * sum(self.coverage) / (len(self.coverage) * max(1, self.env.users.n))
        return {
            "obs": out.obs,
            "rewards": out.rewards,
            "done": out.epoch_done,
            "info": {"qoe3": qoe3, "crashes": self.env.crashes},
        }


def serve_loop(config: ScenarioConfig, stdin, stdout) -> int:
    """Run the session until close or end of input; always exits 0."""
    session = ServeSession(config)
    for line in stdin:
        if not line.strip():
            continue
        reply, keep_going = session.handle(line)
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()
        if not keep_going:
            break
    return 0

"""Tabular Q-learning and SARSA over the mission environment.

Each agent owns a private table (agents never share observations or
values). Both algorithms select the next submitted action before
applying the current update, from the same table state the update's
target reads; with a zero exploration rate and a deterministic world the
two therefore produce bit-identical tables.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import rng
from .config import ScenarioConfig
from .env import Mode, StepOutcome, UavEnv
from .metrics import QoEReport, compute_qoe
from .scenario import User, World

QTABLE_SCHEMA = "skyfleet-qtable/1"

ALGO_QLEARNING = "qlearning"
ALGO_SARSA = "sarsa"


@dataclass
class Hyperparams:
    alpha: float = 0.1
    gamma: float = 0.9
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_epochs: int = 400

    @classmethod
    def from_config(cls, config: ScenarioConfig, training_epochs: int) -> "Hyperparams":
        decay = config.rl.epsilon_decay_epochs
        if decay is None:
            decay = max(1, round(0.8 * training_epochs))
        return cls(
            alpha=config.rl.alpha,
            gamma=config.rl.gamma,
            epsilon_start=config.rl.epsilon_start,
            epsilon_end=config.rl.epsilon_end,
            epsilon_decay_epochs=decay,
        )


def epsilon_at(epoch: int, hp: Hyperparams) -> float:
    """Linear decay from start to end over the decay window, then flat."""
    if epoch >= hp.epsilon_decay_epochs:
        return hp.epsilon_end
    frac = epoch / hp.epsilon_decay_epochs
    return hp.epsilon_start + (hp.epsilon_end - hp.epsilon_start) * frac


class QTable:
    """Dense state-by-action value table with pluggable initialization."""

    def __init__(self, values: np.ndarray, init_strategy: str):
        self.values = values
        self.init_strategy = init_strategy

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    @property
    def n_actions(self) -> int:
        return self.values.shape[1]

    @classmethod
    def init(
        cls,
        n_states: int,
        n_actions: int,
        strategy: str,
        gen: np.random.Generator,
        prior_path: str | Path | None = None,
    ) -> "QTable":
        """Build a fresh table.

        ``zero`` and ``max_reward`` are constant fills (the latter at
        the per-step reward ceiling 1.0, i.e. optimistic); ``random`` is
        i.i.d. uniform [0, 1); ``prior`` loads a previously saved table.
        """
        if strategy == "zero":
            values = np.zeros((n_states, n_actions))
        elif strategy == "random":
            values = gen.random((n_states, n_actions))
        elif strategy == "max_reward":
            values = np.ones((n_states, n_actions))
        elif strategy == "prior":
            if prior_path is None:
                raise ValueError("prior initialization needs a table file")
            table = cls.load(prior_path)
            if table.values.shape != (n_states, n_actions):
                raise ValueError(
                    f"prior table is {table.values.shape}, expected {(n_states, n_actions)}"
                )
            return table
        else:
            raise ValueError(f"unknown qtable init strategy {strategy!r}")
        return cls(values, strategy)

    def save(self, path: str | Path) -> None:
        doc = {
            "schema": QTABLE_SCHEMA,
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "init": self.init_strategy,
            "values": [float(v) for v in self.values.reshape(-1)],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if doc.get("schema") != QTABLE_SCHEMA:
            raise ValueError(f"not a {QTABLE_SCHEMA} document: {path}")
        values = np.array(doc["values"], dtype=float).reshape(doc["n_states"], doc["n_actions"])
        return cls(values, doc.get("init", "prior"))


def select_action(
    q: QTable,
    state: int,
    epsilon: float,
    gen: np.random.Generator,
    valid_mask: np.ndarray | None = None,
) -> int:
    """Epsilon-greedy pick; greedy ties break to the lowest action index."""
    if valid_mask is not None and not valid_mask.any():
        raise ValueError("valid_mask leaves no action to pick")
    if epsilon > 0.0 and gen.random() < epsilon:
        if valid_mask is None:
            return int(gen.integers(q.n_actions))
        choices = np.nonzero(valid_mask)[0]
        return int(choices[gen.integers(len(choices))])
    row = q.values[state]
    if valid_mask is None:
        return int(np.argmax(row))
    masked = np.where(valid_mask, row, -np.inf)
    return int(np.argmax(masked))


def q_update(
    q: QTable, s: int, a: int, r: float, s_next: int, hp: Hyperparams, terminal: bool = False
) -> None:
    target = r if terminal else r + hp.gamma * float(q.values[s_next].max())
    q.values[s, a] += hp.alpha * (target - q.values[s, a])


def sarsa_update(
    q: QTable,
    s: int,
    a: int,
    r: float,
    s_next: int,
    a_next: int,
    hp: Hyperparams,
    terminal: bool = False,
) -> None:
    target = r if terminal else r + hp.gamma * float(q.values[s_next, a_next])
    q.values[s, a] += hp.alpha * (target - q.values[s, a])


# -- epoch plumbing -----------------------------------------------------------


class _EpochRecorder:
    def __init__(self, env: UavEnv):
        self.env = env
        self.coverage: list[int] = []
        self.reward_sums = [0.0] * env.n_agents

    def record(self, outcome: StepOutcome) -> None:
        self.coverage.append(outcome.stats.covered_total)
        for i, r in enumerate(outcome.rewards):
            self.reward_sums[i] += r

    def report(self, epoch: int, epsilon: float | None) -> QoEReport:
        iters = max(1, len(self.coverage))
        return compute_qoe(
            self.env.users,
            self.coverage,
            now=self.env.now,
            crashes=self.env.crashes,
            mean_reward=[s / iters for s in self.reward_sums],
            epoch=epoch,
            epsilon=epsilon,
        )


def _want_trace(trace: str, epoch: int, total: int) -> bool:
    if trace == "all":
        return True
    if trace == "last":
        return epoch == total - 1
    return False


@dataclass
class RunResult:
    qtables: list[QTable] | None
    reports: list[QoEReport]
    trace: list[dict]


def train(
    world: World,
    users: list[User],
    config: ScenarioConfig,
    algo: str,
    epochs: int | None = None,
    hp: Hyperparams | None = None,
    trace: str = "none",
) -> RunResult:
    """Run the multi-agent training loop.

    Every epoch resets the environment, then steps it for the full
    epoch length; each agent learns from its own (possibly noisy)
    observations with the shared epsilon schedule. Crashed agents stop
    acting and learning until the next reset revives them.
    """
    from .env import trace_record  # local to keep module import cheap

    if algo not in (ALGO_QLEARNING, ALGO_SARSA):
        raise ValueError(f"unknown algorithm {algo!r}")
    epochs = config.rl.training_epochs if epochs is None else epochs
    hp = hp or Hyperparams.from_config(config, epochs)
    gen = rng.stream(config.seed, rng.STREAM_RL)
    env = UavEnv(world, users, config)
    tables = [
        QTable.init(env.n_states, env.n_actions, config.rl.qtable_init, gen)
        for _ in range(env.n_agents)
    ]
    reports: list[QoEReport] = []
    traced: list[dict] = []
    for epoch in range(epochs):
        eps = epsilon_at(epoch, hp)
        obs = env.reset(epoch)
        forced = env.forced_actions()
        actions: list[int | None] = []
        for i, agent in enumerate(env.agents):
            if agent.mode is Mode.CRASHED:
                actions.append(None)
            elif forced[i] is not None:
                actions.append(forced[i])
            else:
                actions.append(select_action(tables[i], obs[i], eps, gen))
        recorder = _EpochRecorder(env)
        tracing = _want_trace(trace, epoch, epochs)
        for _ in range(config.epoch_iterations):
            out = env.step(actions)
            next_actions: list[int | None] = [None] * env.n_agents
            for i in range(env.n_agents):
                a = out.credited_actions[i]
                if a is None:
                    continue  # was already crashed
                s, r, s_next = obs[i], out.rewards[i], out.obs[i]
                if out.crashed_now[i]:
                    # crash transitions are terminal: no bootstrap
                    if algo == ALGO_QLEARNING:
                        q_update(tables[i], s, a, r, s_next, hp, terminal=True)
                    else:
                        sarsa_update(tables[i], s, a, r, s_next, 0, hp, terminal=True)
                    continue
                a_next = out.forced_next[i]
                if a_next is None:
                    a_next = select_action(tables[i], s_next, eps, gen)
                if algo == ALGO_QLEARNING:
                    q_update(tables[i], s, a, r, s_next, hp)
                else:
                    sarsa_update(tables[i], s, a, r, s_next, a_next, hp)
                next_actions[i] = a_next
            recorder.record(out)
            if tracing:
                traced.append(trace_record(env, out))
            obs = out.obs
            actions = next_actions
        reports.append(recorder.report(epoch, eps))
    return RunResult(qtables=tables, reports=reports, trace=traced)


def evaluate(
    world: World,
    users: list[User],
    config: ScenarioConfig,
    tables: list[QTable],
    epochs: int = 1,
    epsilon: float = 0.0,
    trace: str = "none",
) -> RunResult:
    """Run a frozen policy (no updates); epsilon 0 is fully greedy."""
    from .env import trace_record

    env = UavEnv(world, users, config)
    if len(tables) != env.n_agents:
        raise ValueError(f"need {env.n_agents} tables, got {len(tables)}")
    for t in tables:
        if t.values.shape != (env.n_states, env.n_actions):
            raise ValueError(
                f"table shape {t.values.shape} does not match environment "
                f"{(env.n_states, env.n_actions)}"
            )
    gen = rng.stream(config.seed, rng.STREAM_RL)
    reports: list[QoEReport] = []
    traced: list[dict] = []
    for epoch in range(epochs):
        obs = env.reset(epoch)
        recorder = _EpochRecorder(env)
        tracing = _want_trace(trace, epoch, epochs)
        for _ in range(config.epoch_iterations):
            forced = env.forced_actions()
            actions = []
            for i, agent in enumerate(env.agents):
                if agent.mode is Mode.CRASHED:
                    actions.append(None)
                elif forced[i] is not None:
                    actions.append(forced[i])
                else:
                    actions.append(select_action(tables[i], obs[i], epsilon, gen))
            out = env.step(actions)
            recorder.record(out)
            if tracing:
                traced.append(trace_record(env, out))
            obs = out.obs
        reports.append(recorder.report(epoch, None))
    return RunResult(qtables=tables, reports=reports, trace=traced)

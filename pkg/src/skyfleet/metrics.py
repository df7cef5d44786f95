"""Quality-of-experience metrics and the per-epoch CSV log.

Three service metrics per epoch:

* completion percentage: how much of each user's demand was met;
* service delay: iterations a request waits beyond the minimum possible
  service time, with unfinished requests charged for the full wait so
  far (this is what blows up for policies that starve users);
* coverage percentage: time-average of the share of users under some
  flying footprint.
"""

import csv
from dataclasses import dataclass
from pathlib import Path


@dataclass
class QoEReport:
    epoch: int
    qoe1_pct: float
    qoe2_iters: float
    qoe3_pct: float
    crashes: int
    mean_reward: list[float]
    epsilon: float | None = None
    no_users: bool = False


def compute_qoe(
    users,
    coverage_counts: list[int],
    now: int,
    crashes: int,
    mean_reward: list[float],
    epoch: int,
    epsilon: float | None = None,
) -> QoEReport:
    """Fold one epoch's coverage log and the user ledger into a report.

    ``users`` is the environment's columnar user table; ``now`` is the
    global iteration count, so waits for unfinished requests keep
    growing across epochs when requests persist.
    """
    n = getattr(users, "n", 0)
    if n == 0:
        return QoEReport(epoch, 0.0, 0.0, 0.0, crashes, mean_reward, epsilon, no_users=True)
    completion = 0.0
    wait = 0.0
    for uid in range(n):
        demand = int(users.demand[uid])
        served = min(int(users.served[uid]), demand)
        completion += served / demand
        if users.completion[uid] >= 0:
            done = int(users.completion[uid])
            wait += (done - int(users.request[uid])) - (demand - 1)
        else:
            wait += max(0, (now - int(users.request[uid])) - (demand - 1))
    qoe1 = 100.0 * completion / n
    qoe2 = wait / n
    if coverage_counts:
        qoe3 = 100.0 * sum(coverage_counts) / (len(coverage_counts) * n)
    else:
        qoe3 = 0.0
    return QoEReport(epoch, qoe1, qoe2, qoe3, crashes, mean_reward, epsilon)


def write_epoch_csv(
    reports: list[QoEReport], path: str | Path, algo: str, case: str, seed: int
) -> None:
    """One row per epoch, stable column order, bit-exact given equal inputs."""
    if not reports:
        raise ValueError("no reports to write")
    n_agents = len(reports[0].mean_reward)
    header = ["epoch", "algo", "case", "seed", "qoe1_pct", "qoe2_iters", "qoe3_pct", "crashes"]
    header += [f"mean_reward_agent{i}" for i in range(n_agents)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for rep in reports:
            row = [
                rep.epoch,
                algo,
                case,
                seed,
                repr(rep.qoe1_pct),
                repr(rep.qoe2_iters),
                repr(rep.qoe3_pct),
                rep.crashes,
            ]
            row += [repr(v) for v in rep.mean_reward]
            writer.writerow(row)

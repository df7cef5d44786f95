"""The nine experiment case presets.

Each case pins one experiment row: environment dimension, bandwidth
cap, battery regime, fleet/population sizes, and the dynamics flags.
Where a row lists two user counts, the first belongs to the Q-learning
run and the second to the SARSA run; ``users_variant`` selects between
them (case 4 uses 23 users for both).
"""

from .config import ScenarioConfig

# (is_3d, bandwidth_limited, battery_limited, num_uavs, num_clusters,
#  (users_qlearning, users_sarsa), num_cs, dynamic, multi, users_move, noise)
_CASE_ROWS = {
    1: (False, False, False, 1, 1, (14, 14), 0, False, False, False, False),
    2: (False, False, False, 2, 2, (19, 20), 0, False, False, False, False),
    3: (False, False, False, 2, 3, (35, 33), 0, False, False, False, False),
    4: (False, False, True, 2, 3, (23, 23), 2, False, False, False, False),
    5: (True, False, True, 2, 2, (21, 24), 2, False, False, False, False),
    6: (True, True, True, 2, 2, (21, 27), 2, False, True, False, False),
    7: (True, True, True, 2, 3, (41, 36), 2, False, True, False, False),
    8: (True, True, True, 3, 4, (48, 48), 3, True, True, True, False),
    9: (True, True, True, 3, 4, (48, 48), 3, True, True, True, True),
}

CASE_IDS = tuple(sorted(_CASE_ROWS))

# Obstacles only matter in 3D (2D flight is above the tallest building),
# but every preset generates the same density so worlds stay comparable.
_OBSTACLE_COVERAGE = 0.2


def case_preset(case: int, seed: int = 0, users_variant: str = "qlearning") -> ScenarioConfig:
    """Build the full configuration for one of the nine study cases."""
    if case not in _CASE_ROWS:
        raise ValueError(f"case must be in 1..9, got {case}")
    if users_variant not in ("qlearning", "sarsa"):
        raise ValueError(f"users_variant must be 'qlearning' or 'sarsa', got {users_variant!r}")
    (is_3d, bw_limited, bat_limited, n_uavs, n_clusters, users_pair,
     n_cs, dynamic, multi, users_move, noise) = _CASE_ROWS[case]
    num_users = users_pair[0 if users_variant == "qlearning" else 1]
    cfg = ScenarioConfig(
        num_uavs=n_uavs,
        num_users=num_users,
        num_clusters=n_clusters,
        num_cs=n_cs,
        num_services=3 if multi else 1,
        obstacle_coverage=_OBSTACLE_COVERAGE,
        is_3d=is_3d,
        battery_limited=bat_limited,
        bandwidth_limited=bw_limited,
        dynamic_requests=dynamic,
        users_move=users_move,
        multi_service=multi,
        position_noise=noise,
        seed=seed,
    )
    return cfg.validate()

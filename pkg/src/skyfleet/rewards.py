"""Per-agent reward functions.

Three schedules cover the study cases: plain coverage for unlimited
battery, a battery-weighted blend of coverage and charge-cost for
battery-limited single-service runs, and the multi-service variant that
splits the service term across request types.
"""

from .config import RewardParams


def battery_weights(
    battery_min: float, needed_min: float, params: RewardParams, typo_fix: bool = True
) -> tuple[float, float]:
    """Service/cost weight pair (w_s, w_c) for a battery level.

    w_s steps down 1.0 / 0.8 / 0.5 / 0.2 / 0.0 through the threshold
    bands c1..c4 and w_c is its complement. Whenever the remaining
    battery no longer exceeds what the trip to a charging station needs,
    the pair collapses to (0, 1) regardless of band.

    With ``typo_fix`` False the 0.8 band keeps its original, empty
    "(c1, c1]" bounds and the schedule skips from 1.0 straight to 0.5.
    """
    b = battery_min
    if b <= needed_min:
        return 0.0, 1.0
    if b > params.c1:
        return 1.0, 0.0
    band2_lo = params.c2 if typo_fix else params.c1
    if band2_lo < b <= params.c1:
        return 0.8, 0.2
    if params.c3 < b <= params.c2:
        return 0.5, 0.5
    if params.c4 < b <= params.c3:
        return 0.2, 0.8
    return 0.0, 1.0


def coverage_reward(covered_by_agent: int, num_users: int, num_uavs: int) -> float:
    """Covered users normalized by the agent's fair share U/N.

    Deliberately unclamped: covering more than the fair share scores
    above 1.
    """
    return covered_by_agent / (num_users / num_uavs)


def charge_cost(battery_min: float, needed_min: float) -> float:
    """Needed-over-remaining battery ratio, clamped to [0, 1].

    A drained battery maxes the cost by convention.
    """
    if battery_min <= 0:
        return 1.0
    return min(1.0, max(0.0, needed_min / battery_min))


def energy_aware_reward(
    battery_min: float,
    needed_min: float,
    r_u: float,
    params: RewardParams,
    typo_fix: bool = True,
) -> float:
    """Battery-weighted blend of the coverage reward and the charge cost."""
    w_s, w_c = battery_weights(battery_min, needed_min, params, typo_fix)
    return w_s * r_u + w_c * charge_cost(battery_min, needed_min)


def multi_service_reward(
    battery_min: float,
    needed_min: float,
    r_u: float,
    s_tr: float,
    s_ec: float,
    s_dg: float,
    params: RewardParams,
    typo_fix: bool = True,
) -> float:
    """Multi-service variant: the service term splits across request types.

    s_tr/s_ec/s_dg are the per-type covered fractions (already clamped
    to [0, 1] by the caller); the cost side adds the constant throughput
    cost, zero by default.
    """
    w_s, w_c = battery_weights(battery_min, needed_min, params, typo_fix)
    service = params.w_u * r_u + params.w_tr * s_tr + params.w_ec * s_ec + params.w_dg * s_dg
    cost = charge_cost(battery_min, needed_min) + params.r_cs_const
    return w_s * service + w_c * cost

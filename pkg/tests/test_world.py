import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skyfleet.scenario import User, generate_world
from skyfleet.world import (
    CsDistanceField,
    KinematicLimits,
    UnreachableError,
    astar_path,
    is_blocked,
    transit_time,
    users_in_footprint,
)

from conftest import make_config
from oracles import bfs_distance, trapezoid_time


def _user(uid, x_m, y_m):
    from skyfleet.scenario import ServiceType

    return User(uid, 0, (x_m, y_m), ServiceType.THROUGHPUT, 1, 1.0)


class TestFootprint:
    def test_user_within_radius_included(self):
        users = [_user(0, 120.0 + 240.0, 120.0)]  # 240 m east of cell (0,0) center
        assert users_in_footprint((0, 0, 0), users, 600.0, 240.0) == users

    def test_boundary_is_closed(self):
        users = [_user(0, 120.0 + 600.0, 120.0)]
        assert users_in_footprint((0, 0, 0), users, 600.0, 240.0) == users

    def test_zero_radius_keeps_only_exact_center(self):
        users = [_user(0, 120.0, 120.0), _user(1, 121.0, 120.0)]
        got = users_in_footprint((0, 0, 0), users, 0.0, 240.0)
        assert [u.id for u in got] == [0]

    def test_altitude_ignored(self):
        users = [_user(0, 120.0, 120.0)]
        assert users_in_footprint((0, 0, 3), users, 600.0, 240.0) == users

    @given(
        r1=st.floats(0, 1200),
        r2=st.floats(0, 1200),
        positions=st.lists(
            st.tuples(st.floats(0, 2400), st.floats(0, 2400)), min_size=1, max_size=20
        ),
    )
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_radius(self, r1, r2, positions):
        users = [_user(i, x, y) for i, (x, y) in enumerate(positions)]
        small, large = sorted((r1, r2))
        inner = {u.id for u in users_in_footprint((4, 4, 0), users, small, 240.0)}
        outer = {u.id for u in users_in_footprint((4, 4, 0), users, large, 240.0)}
        assert inner <= outer


class TestBlocking:
    def test_2d_never_blocked(self):
        cfg = make_config(obstacle_coverage=0.3, seed=2)
        world = generate_world(cfg)
        for y in range(10):
            for x in range(10):
                assert not is_blocked((x, y, 0), world, cfg)

    def test_band_blocking_rule(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.1, seed=2)
        world = generate_world(cfg)
        world.building_height_m[3, 4] = 100.0  # level height is 30 m
        assert is_blocked((4, 3, 1), world, cfg)  # band 30-60: 100 >= 60
        assert not is_blocked((4, 3, 3), world, cfg)  # band 90-120: 100 < 120

    def test_out_of_bounds_rejected(self):
        cfg = make_config()
        world = generate_world(cfg)
        with pytest.raises(ValueError):
            is_blocked((10, 0, 0), world, cfg)


class TestAStar:
    def test_empty_grid_diagonal(self):
        cfg = make_config(obstacle_coverage=0.0)
        world = generate_world(cfg)
        path = astar_path((0, 0, 0), (9, 9, 0), world, cfg)
        assert len(path) == 18
        assert path[-1] == (9, 9, 0)

    def test_start_equals_goal(self):
        cfg = make_config()
        world = generate_world(cfg)
        assert astar_path((3, 3, 0), (3, 3, 0), world, cfg) == []

    def test_unreachable_raises(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.0)
        world = generate_world(cfg)
        # wall off the corner at every level
        world.building_height_m[0, 1] = 1000.0
        world.building_height_m[1, 0] = 1000.0
        world.building_height_m[1, 1] = 1000.0
        with pytest.raises(UnreachableError):
            astar_path((0, 0, 0), (9, 9, 0), world, cfg)

    def test_ignore_obstacles_goes_straight_through(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.0)
        world = generate_world(cfg)
        world.building_height_m[0, 1] = 1000.0
        world.building_height_m[1, 0] = 1000.0
        world.building_height_m[1, 1] = 1000.0
        path = astar_path((0, 0, 0), (9, 9, 0), world, cfg, ignore_obstacles=True)
        assert len(path) == 18

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("is_3d", [False, True])
    def test_matches_bfs_oracle(self, seed, is_3d):
        cfg = make_config(is_3d=is_3d, obstacle_coverage=0.2, seed=seed)
        world = generate_world(cfg)
        heights = world.building_height_m.tolist()
        gen = np.random.Generator(np.random.Philox(key=[seed, 99]))
        free = [
            (x, y, z)
            for z in range(cfg.altitude_levels)
            for y in range(10)
            for x in range(10)
            if not is_blocked((x, y, z), world, cfg)
        ]
        checked = 0
        while checked < 10:
            start = free[int(gen.integers(len(free)))]
            goal = free[int(gen.integers(len(free)))]
            expected = bfs_distance(
                start, goal, heights, cfg.level_height_m, is_3d, 10, 10, cfg.altitude_levels
            )
            if expected < 0:
                continue
            path = astar_path(start, goal, world, cfg)
            assert len(path) == expected
            checked += 1

    def test_path_cells_are_unit_moves_and_unblocked(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.25, seed=3)
        world = generate_world(cfg)
        start, goal = (0, 0, 3), (9, 9, 3)  # near-top lanes stay connected here
        path = [start] + astar_path(start, goal, world, cfg)
        for a, b in zip(path, path[1:]):
            assert sum(abs(a[i] - b[i]) for i in range(3)) == 1
            assert not is_blocked(b, world, cfg)

    def test_deterministic_path(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.2, seed=6)
        world = generate_world(cfg)
        p1 = astar_path((0, 0, 0), (9, 9, 2), world, cfg)
        p2 = astar_path((0, 0, 0), (9, 9, 2), world, cfg)
        assert p1 == p2


class TestDistanceField:
    def test_matches_bfs_everywhere(self):
        cfg = make_config(is_3d=True, obstacle_coverage=0.2, battery_limited=True, num_cs=2, seed=8)
        world = generate_world(cfg)
        field = CsDistanceField(world, cfg)
        heights = world.building_height_m.tolist()
        sources = [(x, y, 0) for x, y in world.cs_cells]
        for z in range(cfg.altitude_levels):
            for y in range(10):
                for x in range(10):
                    if is_blocked((x, y, z), world, cfg):
                        continue
                    best = min(
                        (
                            d
                            for src in sources
                            if (
                                d := bfs_distance(
                                    (x, y, z), src, heights, cfg.level_height_m, True, 10, 10, 4
                                )
                            )
                            >= 0
                        ),
                        default=-1,
                    )
                    assert field.moves_to_cs((x, y, z)) == best

    def test_station_cell_is_zero(self):
        cfg = make_config(battery_limited=True, num_cs=1)
        world = generate_world(cfg)
        x, y = world.cs_cells[0]
        field = CsDistanceField(world, cfg)
        assert field.moves_to_cs((x, y, 0)) == 0


class TestTransitTime:
    def test_zero_distance(self):
        limits = KinematicLimits.for_config(make_config())
        assert transit_time(0.0, limits) == 0.0

    def test_negative_distance_rejected(self):
        limits = KinematicLimits.for_config(make_config())
        with pytest.raises(ValueError):
            transit_time(-1.0, limits)

    def test_cell_transit_takes_one_iteration(self):
        # cruise speed from v^2/a - 60 v + 240 = 0 (smaller root ~= 4.069)
        cfg = make_config()
        limits = KinematicLimits.for_config(cfg)
        roots = np.roots([1.0 / cfg.max_accel_mps2, -60.0, 240.0])
        expected_v = min(r.real for r in roots if r.real > 0)
        assert limits.v_cruise_mps == pytest.approx(expected_v, abs=1e-9)
        assert transit_time(240.0, limits) == pytest.approx(60.0, abs=0.1)
        assert transit_time(240.0, limits) == pytest.approx(
            trapezoid_time(240.0, limits.v_cruise_mps, 4.0), abs=1e-9
        )

    def test_at_speed_limit(self):
        limits = KinematicLimits(v_max_mps=8.3, a_max_mps2=4.0, v_cruise_mps=8.3)
        assert transit_time(240.0, limits) == pytest.approx(240.0 / 8.3 + 8.3 / 4.0, abs=1e-9)
        assert transit_time(240.0, limits) == pytest.approx(31.0, abs=0.1)

    def test_triangular_short_hop(self):
        limits = KinematicLimits(v_max_mps=8.3, a_max_mps2=4.0, v_cruise_mps=8.0)
        d = 4.0  # below v^2/a = 16 m
        assert transit_time(d, limits) == pytest.approx(2.0 * math.sqrt(d / 4.0), abs=1e-12)

    def test_continuous_at_profile_boundary(self):
        limits = KinematicLimits(v_max_mps=8.3, a_max_mps2=4.0, v_cruise_mps=6.0)
        boundary = 6.0 * 6.0 / 4.0
        below = transit_time(boundary - 1e-9, limits)
        above = transit_time(boundary + 1e-9, limits)
        assert abs(below - above) < 1e-6

    @given(d=st.tuples(st.floats(0, 5000), st.floats(0, 5000)))
    @settings(max_examples=80, deadline=None)
    def test_monotone_in_distance(self, d):
        limits = KinematicLimits.for_config(make_config())
        lo, hi = sorted(d)
        assert transit_time(lo, limits) <= transit_time(hi, limits) + 1e-12

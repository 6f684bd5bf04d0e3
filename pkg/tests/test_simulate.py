import math

import pytest

from insq.errors import InvalidArgumentError, TooFewSitesError
from insq.geometry import Point, Site
from insq.network import NetworkPosition
from insq.scenario import Scenario, generate_random
from insq.simulate import (
    Trajectory,
    brute_force_oracle,
    compare_runs,
    metrics_table,
    position_at,
    run_simulation,
)

from test_network import path_graph
from test_scenario import two_site_scenario


def test_position_at_polyline():
    traj = Trajectory(1.0, points=(Point(0, 0), Point(10, 0)))
    assert position_at(traj, 0) == Point(0, 0)
    assert position_at(traj, 4) == Point(4, 0)
    assert position_at(traj, 99) == Point(10, 0)  # clamps at the end
    with pytest.raises(InvalidArgumentError):
        position_at(traj, -1)


def test_position_at_corner():
    traj = Trajectory(2.0, points=(Point(0, 0), Point(4, 0), Point(4, 4)))
    assert position_at(traj, 3) == Point(4, 2)


def test_position_at_skips_degenerate_legs():
    traj = Trajectory(1.0, points=(Point(0, 0), Point(0, 0), Point(8, 0)))
    assert position_at(traj, 5) == Point(5, 0)


def test_position_at_network_path():
    g = path_graph()
    traj = Trajectory(0.5, path=(1, 2, 3, 4, 5), graph=g)
    assert position_at(traj, 0) == NetworkPosition(101, 0.0)
    assert position_at(traj, 3) == NetworkPosition(102, 0.5)
    assert position_at(traj, 1000) == NetworkPosition(104, 1.0)


def test_position_at_network_reverse_orientation():
    g = path_graph()
    traj = Trajectory(0.5, path=(3, 2, 1), graph=g)
    # walking 102 from its v end, so offsets count down
    assert position_at(traj, 1) == NetworkPosition(102, 0.5)
    assert position_at(traj, 3) == NetworkPosition(101, 0.5)


def test_trajectory_validation():
    g = path_graph()
    with pytest.raises(InvalidArgumentError):
        Trajectory(0.0, points=(Point(0, 0),))
    with pytest.raises(InvalidArgumentError):
        Trajectory(1.0)
    with pytest.raises(InvalidArgumentError):
        Trajectory(1.0, path=(1, 3), graph=g)
    with pytest.raises(InvalidArgumentError):
        Trajectory(1.0, path=(1, 2), graph=None)


def test_stationary_scenario_all_none():
    s = Scenario(
        mode="plane",
        k=2,
        rho=1.5,
        speed=1.0,
        bbox=(0, 0, 1000, 1000),
        sites=tuple(Site(i, Point(100.0 * i, 50.0)) for i in range(6)),
        trajectory=(Point(140.0, 60.0),),
        seed=0,
    )
    reports, metrics = run_simulation(s, ticks=40)
    assert len(reports) == 40
    assert all(r.event == "none" for r in reports)
    assert all(r.valid_before_update for r in reports)
    assert metrics.full_recomputes == 0 and metrics.knn_changes == 0
    assert all(r.green_radius < r.red_radius for r in reports)


def test_two_site_crossing_single_swap():
    reports, metrics = run_simulation(two_site_scenario())
    assert len(reports) == 11
    events = [r.event for r in reports]
    assert events.count("swap") == 1
    assert set(events) == {"none", "swap"}
    assert events.index("swap") == 6  # first tick with site 1 strictly closer
    assert reports[5].knn == (0,)
    assert reports[6].knn == (1,)
    assert metrics.swaps == 1 and metrics.full_recomputes == 0


def test_two_site_oracle_crossing_tick():
    oracle = brute_force_oracle(two_site_scenario())
    changes = [t for (_, a), (t, b) in zip(oracle, oracle[1:]) if a != b]
    assert changes == [6]


def test_compare_runs_clean_diff():
    s = two_site_scenario()
    diff = compare_runs(run_simulation(s)[0], brute_force_oracle(s))
    assert diff.ok
    assert diff.total_ticks == 11
    assert diff.mismatches == ()
    assert diff.engine_events == 1
    assert diff.oracle_changes == 1


def test_compare_runs_length_mismatch():
    s = two_site_scenario()
    reports, _ = run_simulation(s)
    with pytest.raises(InvalidArgumentError):
        compare_runs(reports, brute_force_oracle(s)[:-1])


def test_plane_run_matches_oracle():
    s = generate_random("plane", n=80, k=4, rho=1.6, ticks=400, seed=42)
    reports, metrics = run_simulation(s)
    assert len(reports) == 400
    diff = compare_runs(reports, brute_force_oracle(s))
    assert diff.ok
    assert metrics.full_recomputes <= diff.oracle_changes
    assert metrics.false_alarms == 0


def test_plane_events_match_changes_at_rho_one():
    s = generate_random("plane", n=50, k=3, rho=1.0, ticks=300, seed=9)
    reports, _ = run_simulation(s)
    oracle = brute_force_oracle(s)
    event_ticks = [r.t for r in reports if r.event != "none"]
    change_ticks = [
        b[0] for a, b in zip(oracle, oracle[1:]) if set(a[1]) != set(b[1])
    ]
    assert event_ticks == change_ticks


def test_network_run_matches_oracle():
    s = generate_random("network", grid=(6, 5), n=8, k=3, rho=1.3, ticks=250, seed=4)
    reports, metrics = run_simulation(s)
    diff = compare_runs(reports, brute_force_oracle(s))
    assert diff.ok
    assert metrics.full_recomputes <= diff.oracle_changes


def test_runs_are_deterministic():
    for s in (
        generate_random("plane", n=40, k=3, rho=1.6, ticks=200, seed=12),
        generate_random("network", grid=(5, 4), n=6, k=2, ticks=150, seed=12),
    ):
        first, m1 = run_simulation(s)
        second, m2 = run_simulation(s)
        assert first == second
        assert m1 == m2
        assert metrics_table(first) == metrics_table(second)


def test_report_invariants_along_run():
    s = generate_random("plane", n=60, k=5, rho=1.6, ticks=300, seed=3)
    reports, _ = run_simulation(s)
    for r in reports:
        assert (r.event == "none") == r.valid_before_update
        assert set(r.knn) <= set(r.R)
        assert len(r.knn) == 5 and len(r.R) == 8
        assert not set(r.knn) & set(r.is_set)
        if r.event == "none":
            assert r.green_radius < r.red_radius
    # validation scans the state carried into the tick, never more
    for prev, r in zip(reports, reports[1:]):
        assert r.comparisons <= len(prev.knn) + len(prev.is_set)
    assert reports[0].comparisons == 0


def test_network_report_radii():
    s = generate_random("network", grid=(4, 4), n=5, k=2, ticks=120, seed=6)
    reports, _ = run_simulation(s)
    oracle = brute_force_oracle(s)
    assert compare_runs(reports, oracle).ok
    for r in reports:
        if r.event == "none":
            assert r.green_radius < r.red_radius
        assert r.green_radius >= 0


def test_metrics_table_columns():
    s = two_site_scenario()
    reports, metrics = run_simulation(s)
    table = metrics_table(reports)
    lines = table.strip().split("\n")
    assert lines[0] == "tick,event,knn_size,is_size,comparisons"
    assert len(lines) == 12
    assert lines[1] == "0,none,1,1,0"
    wide = metrics_table(reports, recompute_count=True)
    wlines = wide.strip().split("\n")
    assert wlines[0] == "tick,event,knn_size,is_size,comparisons,recompute_count"
    counts = [int(line.split(",")[-1]) for line in wlines[1:]]
    assert counts == sorted(counts)
    assert counts[-1] == metrics.full_recomputes


def test_default_tick_count_matches_generated_length():
    s = generate_random("plane", n=12, k=2, ticks=123, seed=1)
    reports, _ = run_simulation(s)
    assert len(reports) == 123
    n = generate_random("network", grid=(4, 4), n=5, k=2, ticks=123, seed=1)
    nreports, _ = run_simulation(n)
    assert 123 <= len(nreports) <= 131  # walk overshoots by at most one edge


def test_oracle_full_k_returns_everything():
    s = generate_random("plane", n=4, k=4, ticks=20, seed=0)
    for _, knn in brute_force_oracle(s):
        assert sorted(knn) == [0, 1, 2, 3]


def test_run_propagates_init_errors():
    s = two_site_scenario()
    broken = Scenario(
        mode="plane",
        k=5,
        rho=1.0,
        speed=s.speed,
        bbox=s.bbox,
        sites=s.sites,
        trajectory=s.trajectory,
        seed=0,
    )
    with pytest.raises(TooFewSitesError):
        run_simulation(broken)

"""Traffic scenario: control laws, road model, short seeded runs."""

import random

import pytest
from hypothesis import given, strategies as st

from clic.scenario import (
    EmptyReports,
    FaultSpec,
    RoadWorld,
    ScenarioConfig,
    congested_config,
    fuse_occupancy,
    optimize_signals,
    poisson,
    run_scenario,
    split_for,
)


class TestFuseOccupancy:
    def test_weighted_mean_oracle(self):
        assert fuse_occupancy([(0.2, 1.0), (0.8, 3.0)]) == pytest.approx(0.65)

    def test_single_reading(self):
        assert fuse_occupancy([(0.4, 0.7)]) == pytest.approx(0.4)

    def test_zero_weights_fall_back_to_plain_mean(self):
        assert fuse_occupancy([(0.2, 0.0), (0.8, 0.0)]) == pytest.approx(0.5)

    def test_empty_raises(self):
        with pytest.raises(EmptyReports):
            fuse_occupancy([])

    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 5)),
                    min_size=1, max_size=10))
    def test_stays_within_reading_range(self, readings):
        fused = fuse_occupancy(readings)
        values = [v for v, _ in readings]
        assert min(values) - 1e-9 <= fused <= max(values) + 1e-9


class TestSplitFor:
    def test_proportional(self):
        assert split_for(0.6, 0.2) == pytest.approx(0.75)

    def test_clamped(self):
        assert split_for(1.0, 0.0) == 0.9
        assert split_for(0.0, 1.0) == 0.1

    def test_empty_junction_is_even(self):
        assert split_for(0.0, 0.0) == 0.5


class TestOptimizeSignals:
    est = {"0": {"ns": 0.6, "ew": 0.2}, "1": {"ns": 0.0, "ew": 0.0}}

    def test_adaptive_splits(self):
        plans = optimize_signals(self.est, pollution_weight=0.0)
        assert plans["0"]["split"] == pytest.approx(0.75)
        assert plans["1"]["split"] == 0.5
        assert all(p["cycle_s"] == 60.0 for p in plans.values())

    def test_fixed_control_ignores_occupancy(self):
        plans = optimize_signals(self.est, pollution_weight=0.0, fixed=True)
        assert all(p["split"] == 0.5 for p in plans.values())

    def test_pollution_pressure_lengthens_cycles(self):
        plans = optimize_signals(self.est, pollution_weight=-0.45)
        assert all(p["cycle_s"] == 90.0 for p in plans.values())

    def test_threshold_is_strict(self):
        plans = optimize_signals(self.est, pollution_weight=-0.4)
        assert all(p["cycle_s"] == 60.0 for p in plans.values())


class TestPoisson:
    def test_deterministic_per_seed(self):
        draws = [poisson(random.Random(5), 3.0) for _ in range(3)]
        assert draws == [draws[0]] * 3

    def test_mean_roughly_lambda(self):
        rng = random.Random(1)
        n = 5000
        mean = sum(poisson(rng, 3.0) for _ in range(n)) / n
        assert mean == pytest.approx(3.0, abs=0.15)


class TestRoadWorld:
    def make(self, seed=1, n=4):
        return RoadWorld(n=n, arrival_rate=2.0, ns_bias=0.75, saturation=4.0,
                         queue_capacity=20, rng=random.Random(seed))

    def test_vehicle_conservation(self):
        w = self.make()
        for _ in range(200):
            w.step()
        assert w.spawned == w.departed + w.in_flight

    def test_determinism(self):
        a, b = self.make(seed=9), self.make(seed=9)
        for _ in range(100):
            a.step()
            b.step()
        assert a.spawned == b.spawned
        assert a.metrics(2) == b.metrics(2)

    def test_biased_split_beats_even_under_ns_bias(self):
        even, biased = self.make(seed=3), self.make(seed=3)
        for i in range(biased.n):
            biased.splits[i] = 0.75
        for _ in range(300):
            even.step()
            biased.step()
        assert (biased.metrics(2)["avg_transit_time"]
                < even.metrics(2)["avg_transit_time"])

    def test_metrics_ranges(self):
        w = self.make()
        for _ in range(50):
            w.step()
        m = w.metrics(2)
        assert 0.0 <= m["pollution_index"] <= 1.0
        assert 0.0 <= m["driver_satisfaction"] <= 1.0
        assert m["avg_transit_time"] >= 2.0

    def test_empty_world_metrics(self):
        w = RoadWorld(n=1, arrival_rate=0.0, ns_bias=0.5, saturation=1.0,
                      queue_capacity=10, rng=random.Random(0))
        w.step()
        m = w.metrics(2)
        assert m["driver_satisfaction"] == 1.0
        assert m["throughput"] == 0.0


class TestConfig:
    def test_grid_geometry(self):
        cfg = ScenarioConfig()
        assert cfg.n_intersections == 64
        assert len(cfg.camera_intersections) == 16

    def test_json_roundtrip(self):
        cfg = congested_config()
        assert ScenarioConfig.from_json(cfg.to_json()) == cfg

    def test_congested_fixture_shape(self):
        cfg = congested_config()
        assert [f.action for f in cfg.faults] == ["kill", "degrade"]
        assert cfg.spare_camera_intersections == (8,)


def short_config(**kw):
    base = dict(
        grid=4, camera_stride=4, duration_s=60, report_period_s=20,
        faults=(FaultSpec(20_000, "cam-i4", "kill"),),
        spare_camera_intersections=(4,),
        goals=congested_config().goals,
    )
    base.update(kw)
    return ScenarioConfig(**base)


class TestRunScenario:
    def test_short_run_swaps_dead_camera_and_loses_nothing(self):
        r = run_scenario(short_config(), seed=3)
        assert r.channels_ok
        assert r.metrics["messages_lost"] == 0.0
        assert any(s.slot_id == "cam-04" for s in r.swaps)
        assert r.escalations == []

    def test_short_run_is_deterministic(self):
        a = run_scenario(short_config(), seed=5)
        b = run_scenario(short_config(), seed=5)
        assert a.state_hash == b.state_hash
        assert a.metrics == b.metrics
        assert [r.payload for r in a.records] == [r.payload for r in b.records]

    def test_seeds_differ(self):
        a = run_scenario(short_config(), seed=1)
        b = run_scenario(short_config(), seed=2)
        assert a.state_hash != b.state_hash

    def test_adaptive_beats_fixed_on_congested_grid(self):
        adaptive = run_scenario(short_config(duration_s=120), seed=4)
        fixed = run_scenario(short_config(duration_s=120, control="fixed"), seed=4)
        assert (adaptive.metrics["avg_transit_time"]
                <= fixed.metrics["avg_transit_time"])

    def test_pollution_heavy_goals_lengthen_cycles(self):
        goals = (
            {"goal_id": "air", "metric": "pollution_index",
             "direction": "minimize", "weight": 3.0, "tier": 1, "owner": "operator"},
            {"goal_id": "flow", "metric": "avg_transit_time",
             "direction": "minimize", "weight": 1.0, "tier": 1, "owner": "operator"},
        )
        r = run_scenario(short_config(goals=goals, faults=(),
                                      spare_camera_intersections=()), seed=6)
        assert r.mean_cycle_s == pytest.approx(90.0)

    def test_default_goals_keep_base_cycle(self):
        r = run_scenario(short_config(faults=(), spare_camera_intersections=()),
                         seed=6)
        assert r.mean_cycle_s == pytest.approx(60.0)

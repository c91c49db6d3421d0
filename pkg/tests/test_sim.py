"""The hub operations simulator."""

import io

import numpy as np
import pytest

from businterline.allocation import ServicePlan
from businterline.errors import ConfigurationError, MetricsError
from businterline.runtimes import RunTimeModel
from businterline.sim import (CSV_COLUMNS, DepartureRecord, Route, Scenario,
                              apply_passing_rule, compute_metrics, dwell_time,
                              generate_trip_time, records_to_csv, run_scenario,
                              uniform_within_hub)

ZERO_ERROR = RunTimeModel.degenerate(0.0)


def route(rid, headway, model, fleet, ridership=0.0, per_pax=0.0, intercept=0.0):
    return Route(route_id=rid,
                 service_plan=ServicePlan(route_id=rid, headway=headway),
                 runtime_model=model, ridership=ridership, dwell_per_pax=per_pax,
                 dwell_intercept=intercept, dedicated_fleet=fleet)


def scenario(routes, **kw):
    kw.setdefault("within_hub_travel", uniform_within_hub(len(routes), 0.0))
    kw.setdefault("dispatch_error_model", ZERO_ERROR)
    kw.setdefault("horizon", 7200.0)
    kw.setdefault("warmup", 0.0)
    kw.setdefault("seed", 3)
    return Scenario(routes=tuple(routes), **kw)


class TestDwell:
    def test_no_passengers_only_intercept(self):
        r = route("A", 600, RunTimeModel.degenerate(3000), 5, ridership=0.0,
                  per_pax=2.0, intercept=30.0)
        assert dwell_time(r, 600) == 30.0

    def test_linear_in_load(self):
        r = route("A", 600, RunTimeModel.degenerate(3000), 5, ridership=0.05,
                  per_pax=2.0, intercept=30.0)
        assert dwell_time(r, 600) == 90.0
        assert dwell_time(r, 1200) == 150.0


class TestTripTimes:
    def test_degenerate_model_is_exact(self):
        r = route("A", 600, RunTimeModel.degenerate(3000), 5)
        rng = np.random.default_rng(0)
        assert generate_trip_time(r, 600, rng) == 3000.0

    def test_same_seed_same_sequence(self):
        r = route("A", 600, RunTimeModel.lognormal(3000, 0.2), 5)
        rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
        s1 = [generate_trip_time(r, 600, rng1) for _ in range(50)]
        s2 = [generate_trip_time(r, 600, rng2) for _ in range(50)]
        assert s1 == s2

    def test_mean_converges_to_model_mean_plus_dwell(self):
        r = route("A", 600, RunTimeModel.normal(3000, 300), 5, ridership=0.05,
                  per_pax=2.0, intercept=30.0)
        rng = np.random.default_rng(12)
        draws = [generate_trip_time(r, 600, rng) for _ in range(100_000)]
        assert float(np.mean(draws)) == pytest.approx(3000 + 90, abs=5)


class TestPassingRule:
    def test_allowed_is_identity(self):
        assert apply_passing_rule(5000.0, 4800.0, True) == 4800.0

    def test_blocked_arrival_trails_leader(self):
        assert apply_passing_rule(5000.0, 4800.0, False) == 5001.0

    def test_no_conflict_unchanged(self):
        assert apply_passing_rule(5000.0, 5200.0, False) == 5200.0
        assert apply_passing_rule(None, 4800.0, False) == 4800.0


def zero_variance_pair(shared):
    """Two routes, flat run times sized exactly to the schedule."""
    fleets = {"A": 5, "B": 6}
    trips = {"A": 3000.0, "B": 3300.0}
    headways = {"A": 600.0, "B": 550.0}
    routes = [route(rid, headways[rid], RunTimeModel.degenerate(trips[rid]),
                    0 if shared else fleets[rid])
              for rid in ("A", "B")]
    origins = tuple(["A"] * 5 + ["B"] * 6) if shared else ()
    return scenario(routes,
                    shared_fleet_size=11 if shared else 0,
                    shared_bus_origins=origins,
                    dedicated_mode="scheduled",
                    strategy="optimal",
                    warmup=3300.0)


class TestRunScenario:
    def test_zero_variance_is_perfectly_on_time(self):
        report, records = run_scenario(zero_variance_pair(shared=False))
        assert all(r.delay == 0.0 for r in records)
        assert all(r.actual >= r.scheduled for r in records)
        assert report.system.headway_cov == 0.0
        assert report.system.wait_ratio == 1.0

    def test_replay_is_bit_identical(self):
        routes = [route("A", 540, RunTimeModel.lognormal(4600, 0.15), 10,
                        ridership=0.05, per_pax=2.0, intercept=30.0)]
        sc = scenario(routes, dispatch_error_model=RunTimeModel.lognormal(
            30, 1.0, floor_s=0.0, cap_s=600.0), warmup=1000.0)
        _, a = run_scenario(sc)
        _, b = run_scenario(sc)
        assert a == b

    def test_zero_variance_interlined_equals_scheduled(self):
        _, dedicated_log = run_scenario(zero_variance_pair(shared=False))
        _, shared_log = run_scenario(zero_variance_pair(shared=True))
        strip = lambda r: (r.route_id, r.trip_index, r.scheduled, r.actual,
                           r.delay, r.bus_id, r.headway_realized,
                           r.trip_runtime, r.idle_before_dispatch)
        assert [strip(r) for r in dedicated_log] == [strip(r) for r in shared_log]
        assert {r.bus_kind for r in dedicated_log} == {"dedicated"}
        assert {r.bus_kind for r in shared_log} == {"shared"}

    def test_no_early_departures_and_typed_delays(self):
        routes = [route("A", 500, RunTimeModel.lognormal(2600, 0.3), 6,
                        ridership=0.08, per_pax=2.0, intercept=20.0),
                  route("B", 400, RunTimeModel.lognormal(2100, 0.3), 6,
                        ridership=0.08, per_pax=2.0, intercept=20.0)]
        sc = scenario(routes, shared_fleet_size=2,
                      shared_bus_origins=("A", "B"),
                      dedicated_mode="schedule_free",
                      dispatch_error_model=RunTimeModel.lognormal(
                          20, 1.0, floor_s=0.0, cap_s=300.0))
        _, records = run_scenario(sc)
        assert records
        for r in records:
            assert r.actual >= r.scheduled
            assert r.delay == r.actual - r.scheduled
            if r.trip_index >= 2:
                assert r.headway_realized > 0

    def test_each_bus_is_in_one_place_at_a_time(self):
        routes = [route("A", 500, RunTimeModel.lognormal(2600, 0.3), 6),
                  route("B", 400, RunTimeModel.lognormal(2100, 0.3), 6)]
        sc = scenario(routes, dedicated_mode="schedule_free")
        _, records = run_scenario(sc)
        by_bus = {}
        for r in records:
            by_bus.setdefault(r.bus_id, []).append(r)
        assert len(by_bus) <= 12
        for trips in by_bus.values():
            trips.sort(key=lambda r: r.actual)
            for prev, nxt in zip(trips, trips[1:]):
                assert nxt.actual >= prev.hub_arrival

    def test_dwell_uses_realized_headway(self):
        # one bus, flat 650 s run time against a 600 s headway: the second
        # trip leaves 50 s late, so its load grows with the longer gap
        r = route("A", 600, RunTimeModel.degenerate(650), 1,
                  ridership=0.1, per_pax=2.0, intercept=0.0)
        sc = scenario([r], dedicated_mode="schedule_free", horizon=4000.0)
        _, records = run_scenario(sc)
        first, second = records[0], records[1]
        assert first.trip_runtime == 650 + 0.2 * 600
        assert second.headway_realized > 600
        assert second.trip_runtime == pytest.approx(
            650 + 0.2 * second.headway_realized)

    def test_passing_ban_orders_arrivals(self):
        r = route("A", 300, RunTimeModel.lognormal(2000, 0.5), 8)
        for allow in (True, False):
            sc = scenario([r], allow_passing=allow, dedicated_mode="schedule_free")
            _, records = run_scenario(sc)
            arrivals = [x.hub_arrival for x in records]
            ordered = all(b > a for a, b in zip(arrivals, arrivals[1:]))
            if not allow:
                assert ordered

    def test_within_hub_travel_degrades_service(self):
        routes = [route("A", 420, RunTimeModel.lognormal(2400, 0.25), 0),
                  route("B", 380, RunTimeModel.lognormal(2300, 0.25), 0)]
        delays = []
        for setup in (0.0, 240.0, 600.0):
            sc = scenario(routes, shared_fleet_size=12,
                          shared_bus_origins=tuple(["A"] * 6 + ["B"] * 6),
                          within_hub_travel=uniform_within_hub(2, setup),
                          dedicated_mode="schedule_free",
                          horizon=10800.0, warmup=2400.0, seed=5)
            report, _ = run_scenario(sc)
            delays.append(report.system.mean_delay)
        assert delays[0] <= delays[1] <= delays[2]

    def test_optimal_reserves_the_shared_bus_fcfs_burns_it(self):
        # one shared bus, two routes: the fast route's own bus is back in
        # 60 s, the slow route has nothing for 1500 s.  First-come grabs
        # the shared bus for the fast route; the optimizer holds it.
        def make(strategy):
            routes = [route("fast", 600, RunTimeModel.degenerate(660), 1),
                      route("slow", 900, RunTimeModel.degenerate(2400), 1)]
            return scenario(routes, shared_fleet_size=1,
                            shared_bus_origins=("fast",),
                            dedicated_mode="schedule_free",
                            strategy=strategy, lookahead=1, horizon=2000.0)

        _, fcfs_log = run_scenario(make("fcfs"))
        _, optimal_log = run_scenario(make("optimal"))
        slow_trip = lambda log: next(r for r in log
                                     if r.route_id == "slow" and r.trip_index == 2)
        assert slow_trip(fcfs_log).delay == 360.0
        assert slow_trip(optimal_log).delay == 0.0
        assert (sum(r.delay for r in optimal_log)
                < sum(r.delay for r in fcfs_log))

    def test_explicit_timetable_route(self):
        departures = tuple(float(x) for x in range(0, 6600, 600))
        plan = ServicePlan(route_id="A", mode="explicit_timetable",
                           departures=departures, period=(0.0, 7200.0))
        r = Route(route_id="A", service_plan=plan,
                  runtime_model=RunTimeModel.degenerate(1700),
                  dedicated_fleet=3)
        report, records = run_scenario(scenario([r], dedicated_mode="schedule_free"))
        assert [x.scheduled for x in records] == list(departures)
        assert all(x.delay == 0.0 for x in records)
        assert report.per_route["A"].wait_ratio == 1.0

    def test_threshold_releases_only_above_the_configured_delay(self):
        # one dedicated bus slipping 100 s per cycle: expected delays run
        # 100, 200, ...; a 150 s threshold lets the first slip stand and
        # covers the second with the shared bus
        routes = [route("A", 600, RunTimeModel.degenerate(700), 1),
                  route("B", 1000, RunTimeModel.degenerate(100), 1)]
        sc = scenario(routes, shared_fleet_size=1, shared_bus_origins=("B",),
                      dedicated_mode="schedule_free", strategy="threshold",
                      threshold_min_delay=150.0, horizon=2200.0)
        _, records = run_scenario(sc)
        a = {r.trip_index: r for r in records if r.route_id == "A"}
        assert a[2].delay == 100.0 and a[2].bus_kind == "dedicated"
        assert a[3].delay == 0.0 and a[3].bus_kind == "shared"

    def test_threshold_strategy_withholds_shared_buses(self):
        routes = [route("A", 500, RunTimeModel.lognormal(2600, 0.3), 5),
                  route("B", 400, RunTimeModel.lognormal(2100, 0.3), 5)]
        free = dict(shared_fleet_size=2, shared_bus_origins=("A", "B"),
                    dedicated_mode="schedule_free")
        eager, _ = run_scenario(scenario(routes, strategy="fcfs", **free))
        _, held_records = run_scenario(scenario(routes, strategy="threshold",
                                                threshold_min_delay=10 ** 9, **free))
        assert all(r.bus_kind == "dedicated" for r in held_records)

    def test_donor_route_pays_full_sharing_repays(self):
        # giving up one bus raises the donor's headway variability while
        # the rest of the hub benefits; sharing the whole fleet lowers it
        # for everyone
        import json
        from businterline.scenario_io import bundled_path, parse_scenario
        from dataclasses import replace

        base = json.load(open(bundled_path("base_case.json")))["scenario"]
        base["dedicated_mode"] = "schedule_free"

        def mean_covs(shared, reps=6):
            doc = json.loads(json.dumps(base))
            doc["shared_fleet_size"] = shared
            sc = parse_scenario(doc)
            acc = {r.route_id: [] for r in sc.routes}
            for rep in range(reps):
                report, _ = run_scenario(replace(sc, seed=500 + rep))
                for rid, m in report.per_route.items():
                    acc[rid].append(m.headway_cov)
            return sc, {rid: float(np.mean(v)) for rid, v in acc.items()}

        sc1, one_shared = mean_covs(1)
        _, none_shared = mean_covs(0)
        _, all_shared = mean_covs(43)
        donor = sc1.shared_bus_origins[0]
        assert one_shared[donor] > none_shared[donor]
        assert all(all_shared[rid] <= none_shared[rid] for rid in none_shared)

    def test_invalid_scenarios_rejected_before_running(self):
        r = route("A", 600, RunTimeModel.degenerate(3000), 0)
        with pytest.raises(ConfigurationError):
            run_scenario(scenario([r]))  # no buses anywhere
        with pytest.raises(ConfigurationError):
            run_scenario(scenario([route("A", 600, RunTimeModel.degenerate(3000), 2)],
                                  warmup=9000.0))
        with pytest.raises(ConfigurationError):
            run_scenario(scenario([route("A", 600, RunTimeModel.degenerate(3000), 2)],
                                  shared_fleet_size=1))


def record(rid, i, sched, actual, headway, idle=0.0, runtime=3000.0):
    return DepartureRecord(route_id=rid, trip_index=i, scheduled=sched,
                           actual=actual, delay=actual - sched, bus_id=f"{rid}-0",
                           bus_kind="dedicated", headway_realized=headway,
                           trip_runtime=runtime, idle_before_dispatch=idle,
                           hub_arrival=actual + runtime)


class TestMetrics:
    def single_route_scenario(self, headway=600.0):
        return scenario([route("A", headway, RunTimeModel.degenerate(2000), 4)])

    def test_even_headways_are_perfect(self):
        sc = self.single_route_scenario()
        records = [record("A", i, 600 * i, 600 * i, 600.0) for i in range(1, 5)]
        report = compute_metrics(records, sc)
        m = report.per_route["A"]
        assert m.headway_cov == 0.0
        assert m.wait_ratio == 1.0

    def test_uneven_headways_raise_wait(self):
        sc = self.single_route_scenario()
        records = [record("A", 1, 0, 0, 600.0),
                   record("A", 2, 300, 300, 300.0),
                   record("A", 3, 1200, 1200, 900.0)]
        report = compute_metrics(records, sc)
        m = report.per_route["A"]
        assert m.headway_cov == pytest.approx(0.5)
        assert m.mean_wait == pytest.approx(375.0)
        assert m.wait_ratio == pytest.approx(1.25)

    def test_mean_delay(self):
        sc = self.single_route_scenario()
        records = [record("A", 1, 0, 0, 600.0),
                   record("A", 2, 600, 630, 630.0),
                   record("A", 3, 1200, 1260, 630.0)]
        report = compute_metrics(records, sc)
        assert report.per_route["A"].mean_delay == pytest.approx(30.0)

    def test_warmup_exclusion(self):
        sc = scenario([route("A", 600, RunTimeModel.degenerate(2000), 4)],
                      warmup=1000.0)
        records = [record("A", 1, 0, 0, 600.0),
                   record("A", 2, 600, 700, 700.0),
                   record("A", 3, 1200, 1200, 500.0),
                   record("A", 4, 1800, 1800, 600.0)]
        report = compute_metrics(records, sc)
        assert report.per_route["A"].trips_completed == 2
        assert report.per_route["A"].mean_delay == 0.0

    def test_insufficient_data_names_the_route(self):
        sc = self.single_route_scenario()
        with pytest.raises(MetricsError, match="route A"):
            compute_metrics([record("A", 1, 0, 0, 600.0)], sc)

    def test_system_pools_routes(self):
        sc = scenario([route("A", 600, RunTimeModel.degenerate(2000), 4),
                       route("B", 400, RunTimeModel.degenerate(1500), 4)])
        records = [record("A", 1, 0, 10, 600.0), record("A", 2, 600, 610, 600.0),
                   record("B", 1, 0, 50, 400.0), record("B", 2, 400, 450, 400.0)]
        report = compute_metrics(records, sc)
        assert report.system.trips_completed == 4
        assert report.system.mean_delay == pytest.approx((10 + 10 + 50 + 50) / 4)


class TestCsvOutput:
    def test_columns_and_rows(self):
        buf = io.StringIO()
        records_to_csv([record("A", 1, 0, 5, 600.0)], buf)
        lines = buf.getvalue().splitlines()
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert lines[1].startswith("A,1,0,5,5,A-0,dedicated,600.0,")

"""Fleet sizing and shared-fleet donation."""

import numpy as np
import pytest

from businterline.allocation import (AllocationResult, ServicePlan, allocate,
                                     effective_percentile, fleet_size_deficit,
                                     fleet_size_even_headway)
from businterline.errors import DomainError
from businterline.runtimes import RunTimeModel


class TestEvenHeadwaySizing:
    def test_exact_multiple(self):
        assert fleet_size_even_headway(5400, 540) == 10

    def test_ceiling(self):
        assert fleet_size_even_headway(5401, 540) == 11

    def test_published_fleet_implies_cycle_range(self):
        # a 10-bus, 360 s headway design is consistent with cycles in (3240, 3600]
        assert fleet_size_even_headway(3240.5, 360) == 10
        assert fleet_size_even_headway(3600, 360) == 10
        assert fleet_size_even_headway(3240, 360) == 9
        assert fleet_size_even_headway(3600.5, 360) == 11

    def test_rejects_nonpositive(self):
        with pytest.raises(DomainError):
            fleet_size_even_headway(0, 540)
        with pytest.raises(DomainError):
            fleet_size_even_headway(5400, 0)


def explicit_plan(departures, period_end=1e6):
    return ServicePlan(route_id="x", mode="explicit_timetable",
                       departures=tuple(departures), period=(0.0, period_end))


class TestDeficitSizing:
    def test_slow_returns_need_three(self):
        assert fleet_size_deficit(explicit_plan([0, 600, 1200]), 1500) == 3

    def test_fast_returns_need_one(self):
        assert fleet_size_deficit(explicit_plan([0, 600, 1200]), 500) == 1

    def test_single_departure(self):
        assert fleet_size_deficit(explicit_plan([300]), 4000) == 1

    def test_empty_timetable_rejected(self):
        with pytest.raises(DomainError):
            explicit_plan([])

    def test_requires_explicit_plan(self):
        with pytest.raises(DomainError):
            fleet_size_deficit(ServicePlan(route_id="x", headway=600), 1000)

    def test_matches_minute_scan(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            k = int(rng.integers(1, 30))
            deps = np.unique(rng.integers(0, 240, size=k)) * 60.0
            dur = float(rng.integers(5, 120)) * 60.0
            plan = explicit_plan(deps)
            arrivals = deps + dur
            scan_max = 0
            t = 0.0
            while t <= arrivals.max() + 60:
                scan_max = max(scan_max, int((deps <= t).sum() - (arrivals <= t).sum()))
                t += 60.0
            assert fleet_size_deficit(plan, dur) == max(scan_max, 1)

    def test_agrees_with_even_headway_formula(self):
        rng = np.random.default_rng(32)
        for _ in range(30):
            h = float(rng.integers(4, 15)) * 60.0
            cycle = float(rng.integers(10, 90)) * 60.0
            n_even = fleet_size_even_headway(cycle, h)
            deps = [i * h for i in range(3 * n_even)]
            assert fleet_size_deficit(explicit_plan(deps), cycle) == n_even


class TestEffectivePercentile:
    def test_normal_seven_buses(self):
        m = RunTimeModel.normal(3600, 300)
        assert effective_percentile(m, 7, 540) == pytest.approx(0.7257, abs=1e-3)

    def test_normal_eight_buses(self):
        m = RunTimeModel.normal(3600, 300)
        assert effective_percentile(m, 8, 540) == pytest.approx(0.9918, abs=1e-3)

    def test_symmetric_model_at_mean(self):
        m = RunTimeModel.normal(4200, 500)
        assert effective_percentile(m, 7, 600) == pytest.approx(0.5)

    def test_monotone_in_fleet_and_headway(self):
        m = RunTimeModel.lognormal(4000, 0.2)
        values_n = [effective_percentile(m, n, 500) for n in range(1, 12)]
        assert all(b >= a for a, b in zip(values_n, values_n[1:]))
        values_h = [effective_percentile(m, 8, h) for h in (300, 400, 500, 600)]
        assert all(b >= a for a, b in zip(values_h, values_h[1:]))

    def test_preconditions(self):
        m = RunTimeModel.normal(3600, 300)
        with pytest.raises(DomainError):
            effective_percentile(m, 0, 540)
        with pytest.raises(DomainError):
            effective_percentile(m, 5, 0)


def even_route(rid, headway, mean, std):
    return (ServicePlan(route_id=rid, headway=headway),
            RunTimeModel.normal(mean, std))


class TestAllocate:
    def test_zero_target_is_base_allocation(self):
        routes = [even_route("A", 540, 4761, 300), even_route("C", 420, 2972, 450)]
        res = allocate(routes, 0)
        assert res.shared_fleet_size == 0
        assert res.trace == ()
        assert res.dedicated["A"] == fleet_size_even_headway(
            RunTimeModel.normal(4761, 300).quantile(0.95), 540)

    def test_identical_routes_donate_one_each(self):
        routes = [even_route("A", 600, 4000, 300), even_route("B", 600, 4000, 300)]
        res = allocate(routes, 2)
        donors = [r for _, r, _ in res.trace]
        assert donors == ["A", "B"]
        assert res.dedicated["A"] == res.dedicated["B"]

    def test_donor_has_higher_reduced_fleet_percentile(self):
        routes = [even_route("A", 540, 4761, 300), even_route("C", 420, 2972, 450)]
        res = allocate(routes, 1, initial_fleets={"A": 10, "C": 9})
        p_a = RunTimeModel.normal(4761, 300).cdf(9 * 540)
        p_c = RunTimeModel.normal(2972, 450).cdf(8 * 420)
        expected = "A" if p_a > p_c else "C"
        assert res.trace[0][1] == expected
        assert res.trace[0][2] == pytest.approx(max(p_a, p_c))

    def test_conservation(self):
        rng = np.random.default_rng(41)
        for _ in range(25):
            n_routes = int(rng.integers(2, 6))
            routes = [even_route(f"r{i}", float(rng.integers(5, 12)) * 60,
                                 float(rng.integers(2400, 7200)),
                                 float(rng.integers(100, 900)))
                      for i in range(n_routes)]
            base = allocate(routes, 0)
            total = sum(base.dedicated.values())
            target = int(rng.integers(0, sum(max(0, n - 1) for n in base.dedicated.values()) + 1))
            res = allocate(routes, target)
            assert sum(res.dedicated.values()) + res.shared_fleet_size == total
            assert all(n >= 1 for n in res.dedicated.values())

    def test_greedy_trace_is_consistent(self):
        routes = [even_route("A", 540, 4761, 500), even_route("B", 510, 6200, 700),
                  even_route("C", 420, 2972, 450)]
        res = allocate(routes, 5)
        fleets = dict(allocate(routes, 0).dedicated)
        models = {"A": RunTimeModel.normal(4761, 500),
                  "B": RunTimeModel.normal(6200, 700),
                  "C": RunTimeModel.normal(2972, 450)}
        headways = {"A": 540, "B": 510, "C": 420}
        for _, donor, p in res.trace:
            candidates = {
                rid: models[rid].cdf((fleets[rid] - 1) * headways[rid])
                for rid in fleets if fleets[rid] > 1
            }
            assert p == pytest.approx(max(candidates.values()))
            assert candidates[donor] == pytest.approx(max(candidates.values()))
            fleets[donor] -= 1

    def test_target_beyond_floor_names_binding_route(self):
        routes = [even_route("A", 600, 4000, 300), even_route("B", 600, 4000, 300)]
        base = allocate(routes, 0)
        too_many = sum(base.dedicated.values()) - 1
        with pytest.raises(DomainError, match="route"):
            allocate(routes, too_many)

    def test_initial_fleets_respected(self):
        routes = [even_route("A", 540, 4761, 300), even_route("C", 420, 2972, 450)]
        res = allocate(routes, 0, initial_fleets={"A": 10, "C": 9})
        assert res.dedicated == {"A": 10, "C": 9}

    def test_result_total(self):
        res = AllocationResult(dedicated={"A": 3, "B": 4}, shared_fleet_size=2)
        assert res.total() == 9

"""Fleet sizing and the shared-fleet donation algorithm.

Base fleet sizes come from the cycle/headway ratio (even-headway plans)
or from the maximum of the deficit step function (explicit timetables).
Buses are then moved one at a time into the shared pool, always taken
from the route whose run-time distribution covers the reduced cycle at
the highest percentile, i.e. the route least hurt by losing a bus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .runtimes import RunTimeModel

PLAN_MODES = ("even_headway", "explicit_timetable")


@dataclass(frozen=True)
class ServicePlan:
    route_id: str
    mode: str = "even_headway"
    headway: float = 0.0                    # seconds, even mode
    departures: tuple = ()                  # seconds from period start, explicit mode
    period: tuple[float, float] = (0.0, math.inf)

    def __post_init__(self):
        if self.mode not in PLAN_MODES:
            raise DomainError(f"unknown service plan mode {self.mode!r}")
        if self.period[1] < self.period[0]:
            raise DomainError("service period must not end before it starts")
        if self.mode == "even_headway":
            if self.headway <= 0:
                raise DomainError(f"route {self.route_id}: headway must be > 0")
        else:
            deps = tuple(float(d) for d in self.departures)
            if not deps:
                raise DomainError(f"route {self.route_id}: explicit timetable is empty")
            if any(b <= a for a, b in zip(deps, deps[1:])):
                raise DomainError(f"route {self.route_id}: departures must be strictly increasing")
            if deps[0] < self.period[0] or deps[-1] > self.period[1]:
                raise DomainError(f"route {self.route_id}: departures outside the period")
            object.__setattr__(self, "departures", deps)

    def departures_between(self, start: float, end: float) -> np.ndarray:
        """Scheduled departure times in [start, end]."""
        if self.mode == "even_headway":
            n = int(math.floor((end - start) / self.headway + 1e-9)) + 1
            return start + self.headway * np.arange(max(n, 0), dtype=float)
        deps = np.asarray(self.departures, dtype=float)
        return deps[(deps >= start) & (deps <= end)]

    def nominal_headway(self) -> float:
        """Representative headway for dwell and wait baselines."""
        if self.mode == "even_headway":
            return self.headway
        if len(self.departures) < 2:
            return self.departures[0] - self.period[0] if self.departures[0] > self.period[0] else 1.0
        return float(np.mean(np.diff(self.departures)))


@dataclass(frozen=True)
class AllocationResult:
    dedicated: dict                       # route_id -> fleet count
    shared_fleet_size: int
    trace: tuple = ()                     # (step, donor route_id, percentile at donation)

    def total(self) -> int:
        return sum(self.dedicated.values()) + self.shared_fleet_size


def fleet_size_even_headway(cycle: float, headway: float) -> int:
    """Buses needed to hold a headway over a round-trip cycle: ceil(C / h)."""
    if cycle <= 0:
        raise DomainError(f"cycle must be > 0, got {cycle}")
    if headway <= 0:
        raise DomainError(f"headway must be > 0, got {headway}")
    return max(1, int(math.ceil(cycle / headway - 1e-9)))


def fleet_size_deficit(plan: ServicePlan, trip_duration: float) -> int:
    """Maximum of the deficit step function over an explicit timetable.

    The deficit at time t is (departures scheduled up to t) minus
    (arrivals back at the hub up to t), with each bus returning
    trip_duration after it left.  The maximum is attained at a departure
    instant, so only those event times are evaluated.
    """
    if plan.mode != "explicit_timetable":
        raise DomainError("deficit sizing needs an explicit timetable plan")
    if trip_duration <= 0:
        raise DomainError(f"trip_duration must be > 0, got {trip_duration}")
    deps = np.asarray(plan.departures, dtype=float)
    arrivals = deps + trip_duration
    counts = np.arange(1, len(deps) + 1)
    returned = np.searchsorted(arrivals, deps, side="right")
    return int(np.max(counts - returned))


def effective_percentile(model: RunTimeModel, fleet: int, headway: float) -> float:
    """Fraction of round trips that fit in the cycle a fleet of this size
    can sustain at the given headway: cdf(fleet * headway)."""
    if fleet < 1:
        raise DomainError(f"fleet must be >= 1, got {fleet}")
    if headway <= 0:
        raise DomainError(f"headway must be > 0, got {headway}")
    return model.cdf(fleet * headway)


def _base_fleet(plan: ServicePlan, model: RunTimeModel, design_percentile: float) -> int:
    cycle = model.quantile(design_percentile)
    if plan.mode == "even_headway":
        return fleet_size_even_headway(cycle, plan.headway)
    return fleet_size_deficit(plan, cycle)


def _donation_percentile(model: RunTimeModel, fleet_after: int, headway: float) -> float:
    if fleet_after <= 0:
        return 0.0
    return effective_percentile(model, fleet_after, headway)


def allocate(routes, shared_target: int, design_percentile: float = 0.95,
             initial_fleets: dict | None = None,
             min_dedicated: int = 1) -> AllocationResult:
    """Split a fleet into per-route dedicated counts and a shared pool.

    routes: sequence of (ServicePlan, RunTimeModel).  Base counts come
    from the plan (or from `initial_fleets` when the operator's published
    sizes should be used as-is).  Then `shared_target` donation rounds
    each take one bus from the route with the highest effective
    percentile after giving one up; ties go to the earliest route.
    """
    if shared_target < 0:
        raise DomainError("shared fleet target must be >= 0")
    plans = [p for p, _ in routes]
    models = [m for _, m in routes]
    ids = [p.route_id for p in plans]
    if len(set(ids)) != len(ids):
        raise DomainError("route ids must be unique")

    if initial_fleets is not None:
        fleets = [int(initial_fleets[rid]) for rid in ids]
    else:
        fleets = [_base_fleet(p, m, design_percentile) for p, m in routes]

    donatable = sum(max(0, n - min_dedicated) for n in fleets)
    if shared_target > donatable:
        at_floor = [rid for rid, n in zip(ids, fleets) if n <= min_dedicated]
        binding = at_floor[0] if at_floor else ids[0]
        raise DomainError(
            f"shared fleet target {shared_target} exceeds the {donatable} "
            f"donatable buses; route {binding} cannot drop below {min_dedicated}"
        )

    headways = [p.nominal_headway() for p in plans]
    trace = []
    for step in range(shared_target):
        best = None
        for i, (model, n, h) in enumerate(zip(models, fleets, headways)):
            if n <= min_dedicated:
                continue
            p_eff = _donation_percentile(model, n - 1, h)
            if best is None or p_eff > best[1] + 1e-15:
                best = (i, p_eff)
        i, p_eff = best
        fleets[i] -= 1
        trace.append((step + 1, ids[i], p_eff))

    return AllocationResult(
        dedicated={rid: n for rid, n in zip(ids, fleets)},
        shared_fleet_size=shared_target,
        trace=tuple(trace),
    )

"""Time-stepped stochastic simulation of hub-and-spoke bus operations.

Every route is a shuttle between the hub and its far terminal.  The
clock advances in fixed steps; whenever a departure is due the engine
picks a bus (dedicated by rotation or earliest-available, shared via
the configured strategy), draws a dispatching error, generates the trip
duration (moving time sample plus headway-dependent dwell), applies the
passing rule to the hub arrival, and logs a departure record.  Metrics
are computed over the post-warmup log.

Determinism: every random stream is derived from (scenario seed,
route id), with moving times and dispatching errors consumed strictly
in trip order, so the i-th trip of a route sees the same draws no
matter which bus serves it or which strategy runs the hub.
"""

from __future__ import annotations

import csv
import math
import zlib
from collections import deque
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .allocation import ServicePlan
from .dispatch import BusState, HubSnapshot, build_instance, solve
from .errors import ConfigurationError, MetricsError
from .runtimes import RunTimeModel

_EPS = 1e-9

# A later trip never leaves the terminal before (or with) an earlier one.
MIN_DEPARTURE_GAP_S = 1.0
# Without passing, a later-dispatched bus trails its leader into the hub.
MIN_ARRIVAL_GAP_S = 1.0

DEDICATED_MODES = ("scheduled", "schedule_free")
STRATEGIES = ("optimal", "fcfs", "threshold")

DEFAULT_DISPATCH_ERROR = RunTimeModel.lognormal(30.0, 1.0, floor_s=0.0, cap_s=600.0)


@dataclass(frozen=True)
class Route:
    route_id: str
    service_plan: ServicePlan
    runtime_model: RunTimeModel          # moving time, seconds
    ridership: float = 0.0               # passengers per second
    dwell_per_pax: float = 0.0           # seconds per passenger
    dwell_intercept: float = 0.0         # seconds
    dedicated_fleet: int = 0


@dataclass(frozen=True)
class Scenario:
    routes: tuple
    shared_fleet_size: int = 0
    shared_bus_origins: tuple = ()       # home terminal of each shared bus
    within_hub_travel: tuple = ()        # route-by-route seconds, zero diagonal
    allow_passing: bool = True
    dedicated_mode: str = "scheduled"
    dispatch_error_model: RunTimeModel = DEFAULT_DISPATCH_ERROR
    horizon: float = 9000.0
    warmup: float = 0.0
    time_step: float = 1.0
    seed: int = 0
    strategy: str = "optimal"
    threshold_min_delay: float = 0.0
    penalty: float = 86400.0
    lookahead: int = 3

    def total_fleet(self) -> int:
        return sum(r.dedicated_fleet for r in self.routes) + self.shared_fleet_size


@dataclass(frozen=True)
class DepartureRecord:
    route_id: str
    trip_index: int                      # 1-based position in the schedule
    scheduled: float
    actual: float
    delay: float
    bus_id: str
    bus_kind: str
    headway_realized: float
    trip_runtime: float
    idle_before_dispatch: float
    hub_arrival: float                   # when the bus is back and free again


@dataclass(frozen=True)
class RouteMetrics:
    mean_delay: float
    headway_cov: float
    wait_ratio: float
    mean_wait: float
    mean_idle: float
    trips_completed: int

    def to_dict(self) -> dict:
        return {
            "mean_delay_s": self.mean_delay,
            "headway_cov": self.headway_cov,
            "wait_ratio": self.wait_ratio,
            "mean_wait_s": self.mean_wait,
            "mean_idle_s": self.mean_idle,
            "trips_completed": self.trips_completed,
        }


@dataclass(frozen=True)
class MetricsReport:
    per_route: dict
    system: RouteMetrics

    def to_dict(self) -> dict:
        return {
            "per_route": {rid: m.to_dict() for rid, m in self.per_route.items()},
            "system": self.system.to_dict(),
        }


# ---- elementary operations --------------------------------------------------

def dwell_time(route: Route, realized_headway: float) -> float:
    """Trip-level passenger service time: boarding rate times the load
    accumulated over the realized headway, plus a fixed intercept."""
    if realized_headway < 0:
        raise ConfigurationError("realized headway must be >= 0")
    return route.dwell_per_pax * realized_headway * route.ridership + route.dwell_intercept


def generate_trip_time(route: Route, realized_headway: float,
                       rng: np.random.Generator) -> float:
    """One round-trip duration: moving-time draw plus dwell."""
    moving = route.runtime_model.sample(rng)
    return max(moving + dwell_time(route, realized_headway), 1e-9)


def apply_passing_rule(previous_arrival: float | None, candidate_arrival: float,
                       allow_passing: bool) -> float:
    """Clamp a hub arrival so buses return in dispatch order when
    passing is not allowed."""
    if allow_passing or previous_arrival is None:
        return candidate_arrival
    return max(candidate_arrival, previous_arrival + MIN_ARRIVAL_GAP_S)


# ---- scenario validation -----------------------------------------------------

def validate_scenario(sc: Scenario) -> None:
    if not sc.routes:
        raise ConfigurationError("scenario has no routes")
    ids = [r.route_id for r in sc.routes]
    if len(set(ids)) != len(ids):
        raise ConfigurationError("route ids must be unique")
    for r in sc.routes:
        if r.ridership < 0 or r.dwell_per_pax < 0 or r.dwell_intercept < 0:
            raise ConfigurationError(f"route {r.route_id}: dwell/ridership must be >= 0")
        if r.dedicated_fleet < 0:
            raise ConfigurationError(f"route {r.route_id}: dedicated fleet must be >= 0")
        if r.dedicated_fleet == 0 and sc.shared_fleet_size == 0:
            raise ConfigurationError(
                f"route {r.route_id} has no dedicated buses and there is no shared pool"
            )
    if sc.shared_fleet_size < 0:
        raise ConfigurationError("shared fleet size must be >= 0")
    if len(sc.shared_bus_origins) != sc.shared_fleet_size:
        raise ConfigurationError(
            f"{sc.shared_fleet_size} shared buses but {len(sc.shared_bus_origins)} origins"
        )
    for origin in sc.shared_bus_origins:
        if origin not in ids:
            raise ConfigurationError(f"shared bus origin {origin!r} is not a route")
    n = len(sc.routes)
    if len(sc.within_hub_travel) != n or any(len(row) != n for row in sc.within_hub_travel):
        raise ConfigurationError("within-hub travel matrix must be square over the routes")
    for i, row in enumerate(sc.within_hub_travel):
        for j, v in enumerate(row):
            if v < 0:
                raise ConfigurationError("within-hub travel times must be >= 0")
            if i == j and v != 0:
                raise ConfigurationError("within-hub travel diagonal must be 0")
    if sc.horizon <= 0 or sc.time_step <= 0:
        raise ConfigurationError("horizon and time step must be > 0")
    if not 0 <= sc.warmup < sc.horizon:
        raise ConfigurationError("warmup must lie in [0, horizon)")
    if sc.dedicated_mode not in DEDICATED_MODES:
        raise ConfigurationError(f"unknown dedicated mode {sc.dedicated_mode!r}")
    if sc.strategy not in STRATEGIES:
        raise ConfigurationError(f"unknown strategy {sc.strategy!r}")
    if sc.threshold_min_delay < 0:
        raise ConfigurationError("threshold delay must be >= 0")
    if sc.penalty <= 0 or sc.lookahead < 1:
        raise ConfigurationError("penalty must be > 0 and lookahead >= 1")


def uniform_within_hub(n_routes: int, seconds: float) -> tuple:
    """Square matrix with `seconds` off-diagonal and a zero diagonal."""
    return tuple(
        tuple(0.0 if i == j else float(seconds) for j in range(n_routes))
        for i in range(n_routes)
    )


# ---- engine -------------------------------------------------------------------

class _Bus:
    __slots__ = ("bus_id", "kind", "home", "terminal", "avail", "rank")

    def __init__(self, bus_id, kind, home, terminal, rank):
        self.bus_id = bus_id
        self.kind = kind
        self.home = home
        self.terminal = terminal
        self.avail = 0.0
        self.rank = rank


class _RouteState:
    __slots__ = ("route", "idx", "scheds", "n_trips", "next_i", "last_actual",
                 "last_arrival", "rotation", "dedicated", "rng_move", "rng_err",
                 "nominal_h")

    def __init__(self, route, idx, scheds, seed):
        self.route = route
        self.idx = idx
        self.scheds = scheds
        self.n_trips = len(scheds)
        self.next_i = 0
        self.last_actual = None
        self.last_arrival = None
        self.rotation = deque()
        self.dedicated = []
        self.nominal_h = route.service_plan.nominal_headway()
        key = zlib.crc32(route.route_id.encode("utf-8"))
        self.rng_move = np.random.default_rng(np.random.SeedSequence([seed, key, 1]))
        self.rng_err = np.random.default_rng(np.random.SeedSequence([seed, key, 2]))


class _Engine:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.route_states = []
        self.idx_of = {}
        for idx, route in enumerate(scenario.routes):
            plan = route.service_plan
            start = plan.period[0]
            end = min(plan.period[1], scenario.horizon)
            scheds = plan.departures_between(start, end)
            self.route_states.append(_RouteState(route, idx, scheds, scenario.seed))
            self.idx_of[route.route_id] = idx

        self.buses = []
        for rs in self.route_states:
            for slot in range(rs.route.dedicated_fleet):
                bus = _Bus(f"{rs.route.route_id}-{slot}", "dedicated",
                           rs.route.route_id, rs.idx, (rs.idx, slot))
                rs.dedicated.append(bus)
                rs.rotation.append(bus)
                self.buses.append(bus)
        next_slot = {r.route_id: r.dedicated_fleet for r in scenario.routes}
        self.shared = []
        for origin in scenario.shared_bus_origins:
            slot = next_slot[origin]
            next_slot[origin] = slot + 1
            bus = _Bus(f"{origin}-{slot}", "shared", None,
                       self.idx_of[origin], (self.idx_of[origin], slot))
            self.shared.append(bus)
            self.buses.append(bus)
        self.buses.sort(key=lambda b: b.rank)
        self.bus_by_id = {b.bus_id: b for b in self.buses}
        self.records: list[DepartureRecord] = []
        self._setup_dict = {
            a.route_id: {
                b.route_id: float(scenario.within_hub_travel[i][j])
                for j, b in enumerate(scenario.routes)
            }
            for i, a in enumerate(scenario.routes)
        }

    def _setup(self, from_idx: int, to_idx: int) -> float:
        return float(self.sc.within_hub_travel[from_idx][to_idx])

    def run(self) -> list[DepartureRecord]:
        step = self.sc.time_step
        n_steps = int(math.floor(self.sc.horizon / step + _EPS))
        for si in range(n_steps + 1):
            t = si * step
            while self._drain(t):
                pass
        return self.records

    def _drain(self, t: float) -> bool:
        pending = []
        for rs in self.route_states:
            i = rs.next_i
            if i >= rs.n_trips:
                continue
            sched = rs.scheds[i]
            if sched > t + _EPS:
                continue
            if i > 0 and rs.last_actual > t + _EPS:
                continue            # terminal berth still blocked by the previous trip
            pending.append((sched, rs.idx, rs))
        pending.sort(key=lambda x: (x[0], x[1]))
        progressed = False
        for _, _, rs in pending:
            if self._attempt(rs, t):
                progressed = True
        return progressed

    def _attempt(self, rs: _RouteState, t: float) -> bool:
        i = rs.next_i
        sched = float(rs.scheds[i])
        bus, setup = None, 0.0
        if rs.dedicated:
            if self.sc.dedicated_mode == "scheduled":
                head = rs.rotation[0]
                if head.avail <= t + _EPS:
                    bus = head
            else:
                at_hub = [b for b in rs.dedicated if b.avail <= t + _EPS]
                if at_hub:
                    bus = min(at_hub, key=lambda b: (b.avail, b.rank))
        if bus is None and self.shared:
            bus, setup = self._shared_decision(rs, i, sched, t)
        if bus is None:
            return False
        self._commit(rs, i, sched, bus, setup, t)
        return True

    def _shared_decision(self, rs, i, sched, t):
        strategy = self.sc.strategy
        if strategy == "fcfs":
            return self._grant_ready_shared(rs, t)
        if strategy == "threshold":
            expected = self._next_dedicated_avail(rs) - sched
            if expected > self.sc.threshold_min_delay:
                return self._grant_ready_shared(rs, t)
            return None, 0.0
        instance = build_instance(self._snapshot(t), self.sc.lookahead)
        solution = solve(instance)
        bus_id = solution.bus_for(f"{rs.route.route_id}:{i + 1}")
        if bus_id is None:
            return None, 0.0
        bus = self.bus_by_id[bus_id]
        if bus.kind != "shared" or bus.avail > t + _EPS:
            return None, 0.0
        return self._pick_shared(bus, rs, t), self._setup(bus.terminal, rs.idx)

    def _pick_shared(self, chosen, rs, t):
        """Swap the solver's pick for a cost-identical physical bus: the
        most recently arrived one, keeping spare buses resting."""
        target = self._setup(chosen.terminal, rs.idx)
        peers = [b for b in self.shared if b.avail <= t + _EPS
                 and self._setup(b.terminal, rs.idx) == target]
        return min(peers, key=lambda b: (-b.avail, b.terminal != rs.idx, b.rank))

    def _grant_ready_shared(self, rs, t):
        ready = [b for b in self.shared if b.avail <= t + _EPS]
        if not ready:
            return None, 0.0
        bus = min(ready, key=lambda b: (self._setup(b.terminal, rs.idx),
                                        -b.avail, b.terminal != rs.idx, b.rank))
        return bus, self._setup(bus.terminal, rs.idx)

    def _next_dedicated_avail(self, rs) -> float:
        if not rs.dedicated:
            return math.inf
        if self.sc.dedicated_mode == "scheduled":
            return rs.rotation[0].avail
        return min(b.avail for b in rs.dedicated)

    def _snapshot(self, t: float) -> HubSnapshot:
        states = []
        for bus in self.buses:
            if bus.kind == "shared":
                states.append(self._bus_state(bus, t))
        for rs in self.route_states:
            if not rs.dedicated:
                continue
            if self.sc.dedicated_mode == "scheduled":
                lineup = list(rs.rotation)[: self.sc.lookahead]
            else:
                lineup = rs.dedicated
            states.extend(self._bus_state(b, t) for b in lineup)
        states.sort(key=lambda s: self.bus_by_id[s.bus_id].rank)
        schedules = {}
        for rs in self.route_states:
            hi = min(rs.next_i + self.sc.lookahead, rs.n_trips)
            schedules[rs.route.route_id] = tuple(
                (f"{rs.route.route_id}:{j + 1}", float(rs.scheds[j]))
                for j in range(rs.next_i, hi)
            )
        return HubSnapshot(
            decision_time=t,
            buses=tuple(states),
            schedules=schedules,
            setup_time=self._setup_dict,
            penalty=self.sc.penalty,
        )

    def _bus_state(self, bus: _Bus, t: float) -> BusState:
        # An idle bus can begin its next task (e.g. a terminal transfer)
        # no earlier than now, even if it arrived long ago.
        return BusState(
            bus_id=bus.bus_id,
            kind=bus.kind,
            route_id=bus.home,
            available_at=max(bus.avail, t),
            at_terminal_of=self.sc.routes[bus.terminal].route_id,
        )

    def _commit(self, rs, i, sched, bus, setup, t):
        ready = t + setup
        raw = max(sched, ready)
        if rs.last_actual is not None:
            raw = max(raw, rs.last_actual + MIN_DEPARTURE_GAP_S)
        error = float(self.sc.dispatch_error_model.sample(rs.rng_err))
        actual = raw + error
        headway = actual - rs.last_actual if i > 0 else rs.nominal_h
        trip_time = generate_trip_time(rs.route, headway, rs.rng_move)
        arrival = apply_passing_rule(rs.last_arrival, actual + trip_time,
                                     self.sc.allow_passing)
        became_available = t + setup if setup > 0 else bus.avail
        self.records.append(DepartureRecord(
            route_id=rs.route.route_id,
            trip_index=i + 1,
            scheduled=sched,
            actual=actual,
            delay=actual - sched,
            bus_id=bus.bus_id,
            bus_kind=bus.kind,
            headway_realized=headway,
            trip_runtime=trip_time,
            idle_before_dispatch=max(0.0, actual - became_available),
            hub_arrival=arrival,
        ))
        bus.avail = arrival
        bus.terminal = rs.idx
        if bus.kind == "dedicated" and self.sc.dedicated_mode == "scheduled":
            rs.rotation.rotate(-1)
        rs.last_actual = actual
        rs.last_arrival = arrival
        rs.next_i += 1


def run_scenario(scenario: Scenario) -> tuple[MetricsReport, list[DepartureRecord]]:
    """Simulate one scenario and return (metrics, departure log)."""
    validate_scenario(scenario)
    records = _Engine(scenario).run()
    return compute_metrics(records, scenario), records


# ---- metrics -------------------------------------------------------------------

def _route_metrics(group: list[DepartureRecord], scheduled_wait: float) -> RouteMetrics:
    delays = np.array([r.delay for r in group])
    idles = np.array([r.idle_before_dispatch for r in group])
    headways = np.array([r.headway_realized for r in group if r.trip_index >= 2])
    cov = float(np.std(headways) / np.mean(headways))
    actual_wait = float(np.sum(headways ** 2) / (2.0 * np.sum(headways)))
    return RouteMetrics(
        mean_delay=float(np.mean(delays)),
        headway_cov=cov,
        wait_ratio=actual_wait / scheduled_wait,
        mean_wait=actual_wait,
        mean_idle=float(np.mean(idles)),
        trips_completed=len(group),
    )


def compute_metrics(records: Iterable[DepartureRecord], scenario: Scenario) -> MetricsReport:
    """Reliability metrics over the post-warmup departures.

    Passenger wait on a route assumes uniform arrivals over the realized
    headways, sum(h^2) / (2 sum(h)); the scheduled wait baseline is half
    the scheduled headway.  System values pool delays and idle times
    over all departures and weight the per-route ratio metrics by trips.
    """
    post = [r for r in records if r.scheduled >= scenario.warmup - _EPS]
    groups: dict[str, list[DepartureRecord]] = {r.route_id: [] for r in scenario.routes}
    for rec in post:
        groups[rec.route_id].append(rec)

    per_route = {}
    for route in scenario.routes:
        group = groups[route.route_id]
        if len(group) < 2:
            raise MetricsError(
                f"route {route.route_id}: {len(group)} post-warmup departures, need >= 2"
            )
        per_route[route.route_id] = _route_metrics(
            group, route.service_plan.nominal_headway() / 2.0
        )

    all_delays = np.array([r.delay for r in post])
    all_idles = np.array([r.idle_before_dispatch for r in post])
    weights = np.array([m.trips_completed for m in per_route.values()], dtype=float)
    weights /= weights.sum()
    system = RouteMetrics(
        mean_delay=float(np.mean(all_delays)),
        headway_cov=float(np.dot(weights, [m.headway_cov for m in per_route.values()])),
        wait_ratio=float(np.dot(weights, [m.wait_ratio for m in per_route.values()])),
        mean_wait=float(np.dot(weights, [m.mean_wait for m in per_route.values()])),
        mean_idle=float(np.mean(all_idles)),
        trips_completed=len(post),
    )
    return MetricsReport(per_route=per_route, system=system)


# ---- departure log output --------------------------------------------------------

CSV_COLUMNS = ("route_id", "trip_index", "scheduled_s", "actual_s", "delay_s",
               "bus_id", "bus_kind", "headway_s", "runtime_s", "idle_s")


def records_to_csv(records: Iterable[DepartureRecord], fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        writer.writerow([
            r.route_id, r.trip_index, r.scheduled, r.actual, r.delay,
            r.bus_id, r.bus_kind, r.headway_realized, r.trip_runtime,
            r.idle_before_dispatch,
        ])

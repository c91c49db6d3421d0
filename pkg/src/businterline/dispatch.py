"""Real-time assignment of buses to upcoming trips.

At a dispatching time the hub sees, per route, the next few scheduled
trips and the nearest inbound buses, plus everything already at the
hub.  Dedicated buses may only serve their own route; shared buses may
serve any route after a within-hub transfer.  The solver returns a
provably optimal matching for

    minimize  sum(cost of chosen pairs) + sum(penalty of uncovered trips)

with every bus used at most once and every trip covered at most once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ConfigurationError, DomainError

DEFAULT_PENALTY = 86400.0   # one day; dominates any within-horizon delay
DEFAULT_LOOKAHEAD = 3

# Perturbation weights for deterministic tie-breaking; see solve().
_EPS_UNASSIGNED = 1e-3
_EPS_SHARED = 1e-6
_EPS_CROSS = 2.5e-7
_EPS_RANK = 1e-11


@dataclass(frozen=True)
class BusState:
    bus_id: str
    kind: str                      # "dedicated" | "shared"
    route_id: str | None           # home route for dedicated buses
    available_at: float            # seconds; predicted hub arrival if en route
    at_terminal_of: str | None     # terminal location; None = neutral hub pool

    def __post_init__(self):
        if self.kind not in ("dedicated", "shared"):
            raise ConfigurationError(f"bus {self.bus_id}: unknown kind {self.kind!r}")
        if self.kind == "dedicated" and self.route_id is None:
            raise ConfigurationError(f"bus {self.bus_id}: dedicated bus needs a route")


@dataclass(frozen=True)
class TripRequest:
    trip_id: str
    route_id: str
    scheduled_departure: float
    penalty: float = DEFAULT_PENALTY

    def __post_init__(self):
        if self.penalty <= 0:
            raise ConfigurationError(f"trip {self.trip_id}: penalty must be > 0")


@dataclass(frozen=True)
class DispatchInstance:
    decision_time: float
    buses: tuple
    trips: tuple
    setup_time: dict = field(default_factory=dict)   # {from_route: {to_route: seconds}}
    feasible: frozenset = frozenset()

    def __post_init__(self):
        bus_ids = [b.bus_id for b in self.buses]
        trip_ids = [t.trip_id for t in self.trips]
        if len(set(bus_ids)) != len(bus_ids):
            raise ConfigurationError("duplicate bus ids in instance")
        if len(set(trip_ids)) != len(trip_ids):
            raise ConfigurationError("duplicate trip ids in instance")
        for src, row in self.setup_time.items():
            for dst, s in row.items():
                if s < 0:
                    raise ConfigurationError(f"setup time {src}->{dst} is negative")
                if src == dst and s != 0:
                    raise ConfigurationError(f"setup time {src}->{src} must be 0")
        if not self.feasible:
            object.__setattr__(self, "feasible", derive_feasible(self.buses, self.trips))
        else:
            allowed = derive_feasible(self.buses, self.trips)
            if not frozenset(self.feasible) <= allowed:
                raise ConfigurationError(
                    "feasible set contains a dedicated bus paired with a foreign route"
                )
            object.__setattr__(self, "feasible", frozenset(self.feasible))

    def setup(self, from_terminal: str | None, to_route: str) -> float:
        if from_terminal is None or from_terminal == to_route:
            return 0.0
        return float(self.setup_time.get(from_terminal, {}).get(to_route, 0.0))


@dataclass(frozen=True)
class AssignmentSolution:
    assignments: tuple               # ((bus_id, trip_id), ...) in trip order
    unassigned_trips: tuple
    objective: float

    def bus_for(self, trip_id: str) -> str | None:
        for b, t in self.assignments:
            if t == trip_id:
                return b
        return None

    def to_dict(self) -> dict:
        return {
            "assignments": [list(p) for p in self.assignments],
            "unassigned_trips": list(self.unassigned_trips),
            "objective_s": self.objective,
        }


def derive_feasible(buses, trips) -> frozenset:
    """A pair is feasible iff the bus is shared or dedicated to the trip's route."""
    pairs = set()
    for b in buses:
        for t in trips:
            if b.kind == "shared" or b.route_id == t.route_id:
                pairs.add((b.bus_id, t.trip_id))
    return frozenset(pairs)


def assignment_cost(bus: BusState, trip: TripRequest, instance: DispatchInstance) -> float:
    """Delay incurred by running this trip with this bus: lateness of the
    bus after any within-hub transfer, floored at zero (an early bus waits)."""
    if (bus.bus_id, trip.trip_id) not in instance.feasible:
        raise DomainError(f"pair ({bus.bus_id}, {trip.trip_id}) is not feasible")
    ready = bus.available_at + instance.setup(bus.at_terminal_of, trip.route_id)
    return max(0.0, ready - trip.scheduled_departure)


def _extract(instance, rows, cols, cost, big, n_b, n_t):
    chosen = {}
    for r, c in zip(rows, cols):
        if r < n_b and c < n_t and cost[r, c] < big:
            chosen[c] = r
    assignments = []
    unassigned = []
    objective = 0.0
    for j, trip in enumerate(instance.trips):
        if j in chosen:
            bus = instance.buses[chosen[j]]
            assignments.append((bus.bus_id, trip.trip_id))
            objective += assignment_cost(bus, trip, instance)
        else:
            unassigned.append(trip.trip_id)
            objective += trip.penalty
    return AssignmentSolution(tuple(assignments), tuple(unassigned), objective)


def solve(instance: DispatchInstance) -> AssignmentSolution:
    """Exact minimum-cost matching with a per-trip skip option.

    The bipartite graph is padded with one dummy column per bus (leave
    the bus idle, cost 0) and one dummy row per trip (leave the trip
    uncovered, cost = penalty), so a full square matching always exists
    and the Hungarian solve is exact.

    Ties between equal-cost optima are broken deterministically: cover
    more trips, prefer dedicated over shared buses, prefer a bus already
    at the trip's terminal, then prefer buses and trips listed earlier.
    The tie-broken matching is only accepted if its true objective
    matches the unperturbed optimum.
    """
    n_b, n_t = len(instance.buses), len(instance.trips)
    if n_t == 0:
        return AssignmentSolution((), (), 0.0)

    pair_cost = np.full((n_b, n_t), np.nan)
    total_scale = sum(t.penalty for t in instance.trips)
    for i, bus in enumerate(instance.buses):
        for j, trip in enumerate(instance.trips):
            if (bus.bus_id, trip.trip_id) in instance.feasible:
                c = assignment_cost(bus, trip, instance)
                pair_cost[i, j] = c
                total_scale += c
    big = total_scale + 1000.0

    size = n_b + n_t
    base = np.full((size, size), big)
    for i in range(n_b):
        base[i, n_t + i] = 0.0                      # bus stays idle
    for j, trip in enumerate(instance.trips):
        base[n_b + j, j] = trip.penalty             # trip goes uncovered
    base[n_b:, n_t:] = 0.0                          # dummy-dummy filler
    feas = ~np.isnan(pair_cost)
    base[:n_b, :n_t][feas] = pair_cost[feas]

    perturbed = base.copy()
    for j in range(n_t):
        perturbed[n_b + j, j] += _EPS_UNASSIGNED
    for i, bus in enumerate(instance.buses):
        for j, trip in enumerate(instance.trips):
            if feas[i, j]:
                bump = _EPS_RANK * (i + 1) * (n_t - j)
                if bus.kind == "shared":
                    bump += _EPS_SHARED
                if bus.at_terminal_of is not None and bus.at_terminal_of != trip.route_id:
                    bump += _EPS_CROSS
                perturbed[i, j] += bump

    r0, c0 = linear_sum_assignment(base)
    best = _extract(instance, r0, c0, base, big, n_b, n_t)
    r1, c1 = linear_sum_assignment(perturbed)
    tied = _extract(instance, r1, c1, base, big, n_b, n_t)
    if tied.objective <= best.objective + 1e-9 * (1.0 + abs(best.objective)):
        return tied
    return best


@dataclass(frozen=True)
class HubSnapshot:
    """What the dispatcher can see at one decision time: every bus with a
    predicted hub arrival, and the upcoming departures of every route."""

    decision_time: float
    buses: tuple                                  # BusState, in priority order
    schedules: dict                               # route_id -> ((trip_id, scheduled), ...)
    setup_time: dict = field(default_factory=dict)
    penalty: float = DEFAULT_PENALTY


def build_instance(snapshot: HubSnapshot, k: int = DEFAULT_LOOKAHEAD) -> DispatchInstance:
    """Assemble the assignment problem for one decision time.

    Keeps the k next trips per route, every hub-resident bus, every
    shared bus (at the hub or inbound), and per route the k
    earliest-arriving inbound dedicated buses.
    """
    if k < 1:
        raise ConfigurationError(f"lookahead depth must be >= 1, got {k}")
    now = snapshot.decision_time
    route_order = {rid: n for n, rid in enumerate(snapshot.schedules)}

    trips = []
    for rid, upcoming in snapshot.schedules.items():
        for trip_id, sched in upcoming[:k]:
            trips.append(TripRequest(trip_id, rid, float(sched), snapshot.penalty))
    trips.sort(key=lambda t: (t.scheduled_departure, route_order[t.route_id]))

    inbound: dict[str, list] = {}
    for bus in snapshot.buses:
        if bus.kind == "dedicated" and bus.available_at > now:
            inbound.setdefault(bus.route_id, []).append(bus)
    keep = set()
    for group in inbound.values():
        group.sort(key=lambda b: (b.available_at, b.bus_id))
        keep.update(b.bus_id for b in group[:k])
    buses = tuple(
        b for b in snapshot.buses
        if b.available_at <= now or b.kind == "shared" or b.bus_id in keep
    )

    return DispatchInstance(
        decision_time=now,
        buses=tuple(buses),
        trips=tuple(trips),
        setup_time=snapshot.setup_time,
    )


def dispatch_dedicated(trip_scheduled: float, buses, mode: str, now: float,
                       assigned_bus_id: str | None = None):
    """Rule-based choice of a dedicated bus for a due departure.

    Scheduled operation: the pre-assigned bus runs the trip, waiting if
    early and leaving on arrival if late.  Schedule-free operation: the
    earliest-available bus at the hub runs it; with nobody at the hub
    the trip goes out late when the next bus arrives.

    Returns (bus, departure time) or (None, None) when the route has no
    dedicated bus at all.
    """
    if mode not in ("scheduled", "schedule_free"):
        raise ConfigurationError(f"unknown dedicated mode {mode!r}")
    buses = list(buses)
    if not buses:
        return None, None
    if mode == "scheduled":
        pick = next((b for b in buses if b.bus_id == assigned_bus_id), None)
        if pick is None:
            return None, None
        return pick, max(trip_scheduled, pick.available_at)
    at_hub = [b for b in buses if b.available_at <= now]
    if at_hub:
        pick = min(at_hub, key=lambda b: (b.available_at, b.bus_id))
        return pick, max(trip_scheduled, pick.available_at)
    pick = min(buses, key=lambda b: (b.available_at, b.bus_id))
    return pick, max(trip_scheduled, pick.available_at)


# ---- JSON wire format -----------------------------------------------------

def instance_from_dict(doc: dict) -> DispatchInstance:
    try:
        buses = tuple(
            BusState(
                bus_id=str(b["bus_id"]),
                kind=str(b["kind"]),
                route_id=b.get("route_id"),
                available_at=float(b["available_at_s"]),
                at_terminal_of=b.get("at_terminal_of"),
            )
            for b in doc["buses"]
        )
        trips = tuple(
            TripRequest(
                trip_id=str(t["trip_id"]),
                route_id=str(t["route_id"]),
                scheduled_departure=float(t["scheduled_departure_s"]),
                penalty=float(t.get("penalty_s", DEFAULT_PENALTY)),
            )
            for t in doc["trips"]
        )
    except KeyError as exc:
        raise ConfigurationError(f"dispatch instance is missing field {exc}") from exc
    return DispatchInstance(
        decision_time=float(doc.get("decision_time_s", 0.0)),
        buses=buses,
        trips=trips,
        setup_time={
            str(src): {str(dst): float(s) for dst, s in row.items()}
            for src, row in doc.get("setup_time_s", {}).items()
        },
    )


def instance_to_dict(instance: DispatchInstance) -> dict:
    return {
        "decision_time_s": instance.decision_time,
        "buses": [
            {
                "bus_id": b.bus_id,
                "kind": b.kind,
                "route_id": b.route_id,
                "available_at_s": b.available_at,
                "at_terminal_of": b.at_terminal_of,
            }
            for b in instance.buses
        ],
        "trips": [
            {
                "trip_id": t.trip_id,
                "route_id": t.route_id,
                "scheduled_departure_s": t.scheduled_departure,
                "penalty_s": t.penalty,
            }
            for t in instance.trips
        ],
        "setup_time_s": instance.setup_time,
    }


def solve_file(path: str) -> dict:
    with open(path) as fh:
        doc = json.load(fh)
    return solve(instance_from_dict(doc)).to_dict()

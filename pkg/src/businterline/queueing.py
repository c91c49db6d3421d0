"""Steady-state wait analysis of hub departure queues.

Buses are the servers, scheduled trips are the customers, and the wait
in queue is the departure delay at the terminal.  The multi-server wait
with general arrival/service variability is approximated by the M/M/c
wait scaled by (Ca^2 + Cs^2) / 2.  Rates are accepted per hour at the
interface and converted to per-second once; all returned waits are in
seconds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import simulate_queue_waits
from .errors import DomainError

SECONDS_PER_HOUR = 3600.0


@dataclass(frozen=True)
class QueueSpec:
    """A c-server queue: rates per hour, dimensionless variation coefficients."""

    servers: int
    arrival_rate: float      # customers per hour
    service_rate: float      # customers per hour per server
    cv_arrival: float = 0.0
    cv_service: float = 0.0

    def __post_init__(self):
        if self.servers < 1:
            raise DomainError(f"servers must be >= 1, got {self.servers}")
        if self.arrival_rate < 0:
            raise DomainError("arrival_rate must be >= 0")
        if self.service_rate <= 0:
            raise DomainError("service_rate must be > 0")
        if self.cv_arrival < 0 or self.cv_service < 0:
            raise DomainError("variation coefficients must be >= 0")
        if self.arrival_rate >= self.servers * self.service_rate:
            raise DomainError(
                "unstable system: arrival rate "
                f"{self.arrival_rate}/h is not below capacity "
                f"{self.servers} x {self.service_rate}/h"
            )

    @property
    def offered_load(self) -> float:
        return self.arrival_rate / self.service_rate

    @property
    def utilization(self) -> float:
        return self.arrival_rate / (self.servers * self.service_rate)


@dataclass(frozen=True)
class WaitResult:
    wait_mmc: float                 # seconds
    wait_ggc: float                 # seconds
    utilization: float
    expected_busy_servers: float
    prob_all_busy: float

    def to_dict(self) -> dict:
        return {
            "wait_mmc_s": self.wait_mmc,
            "wait_ggc_s": self.wait_ggc,
            "utilization": self.utilization,
            "expected_busy_servers": self.expected_busy_servers,
            "prob_all_busy": self.prob_all_busy,
        }


def erlang_c(servers: int, offered_load: float) -> float:
    """Probability that an arriving customer has to wait.

    Uses the blocking-probability recurrence B(n) = a B(n-1) / (n + a B(n-1)),
    which stays well conditioned for large server counts, then converts to
    the waiting probability C = c B / (c - a (1 - B)).
    """
    if servers < 1:
        raise DomainError(f"servers must be >= 1, got {servers}")
    if offered_load < 0:
        raise DomainError("offered load must be >= 0")
    if offered_load >= servers:
        raise DomainError(
            f"unstable system: offered load {offered_load} >= servers {servers}"
        )
    if offered_load == 0:
        return 0.0
    b = 1.0
    for n in range(1, int(servers) + 1):
        b = offered_load * b / (n + offered_load * b)
    return servers * b / (servers - offered_load * (1.0 - b))


def wait_mmc(spec: QueueSpec) -> float:
    """Mean wait in queue of the M/M/c system, in seconds."""
    if spec.arrival_rate == 0:
        return 0.0
    lam = spec.arrival_rate / SECONDS_PER_HOUR
    mu = spec.service_rate / SECONDS_PER_HOUR
    c = spec.servers
    prob_wait = erlang_c(c, spec.offered_load)
    return prob_wait / (c * mu - lam)


def wait_ggc(spec: QueueSpec) -> WaitResult:
    """Mean wait with general variability: the M/M/c wait scaled by
    (Ca^2 + Cs^2) / 2."""
    base = wait_mmc(spec)
    correction = (spec.cv_arrival ** 2 + spec.cv_service ** 2) / 2.0
    prob_wait = erlang_c(spec.servers, spec.offered_load)
    return WaitResult(
        wait_mmc=base,
        wait_ggc=base * correction,
        utilization=spec.utilization,
        expected_busy_servers=spec.offered_load,
        prob_all_busy=prob_wait,
    )


def pooling_comparison(route_count: int, per_route_servers: int,
                       per_route_rate: float, service_rate: float,
                       cv_service: float) -> tuple[float, float]:
    """Wait with per-route dedicated fleets vs. one pooled fleet.

    Dedicated: each of the `route_count` identical routes runs its own
    c-server queue.  Pooled: a single queue with route_count * c servers
    and the summed arrival rate.  Schedule arrivals are deterministic,
    so cv_arrival is 0 in both configurations.
    """
    if route_count < 1:
        raise DomainError("route_count must be >= 1")
    dedicated = wait_ggc(QueueSpec(
        servers=per_route_servers,
        arrival_rate=per_route_rate,
        service_rate=service_rate,
        cv_arrival=0.0,
        cv_service=cv_service,
    ))
    pooled = wait_ggc(QueueSpec(
        servers=route_count * per_route_servers,
        arrival_rate=route_count * per_route_rate,
        service_rate=service_rate,
        cv_arrival=0.0,
        cv_service=cv_service,
    ))
    return dedicated.wait_ggc, pooled.wait_ggc


def pooling_sweep(route_counts, utilizations, per_route_servers: int,
                  service_rate: float, cv_service: float) -> list[tuple[int, float, float]]:
    """Rows of (route_count, utilization, pooled wait seconds) for
    wait-vs-utilization curves."""
    rows = []
    for m in route_counts:
        for rho in utilizations:
            lam = rho * per_route_servers * service_rate
            spec = QueueSpec(
                servers=m * per_route_servers,
                arrival_rate=m * lam,
                service_rate=service_rate,
                cv_arrival=0.0,
                cv_service=cv_service,
            )
            rows.append((m, rho, wait_ggc(spec).wait_ggc))
    return rows


def simulate_mmc_wait(spec: QueueSpec, n_arrivals: int = 1_000_000,
                      seed: int = 0, skip_fraction: float = 0.05) -> tuple[float, float]:
    """Monte Carlo estimate of (mean wait seconds, waiting probability)
    for the M/M/c system, by replaying pre-drawn exponential arrivals
    and services through the queue kernel."""
    if spec.arrival_rate <= 0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    lam = spec.arrival_rate / SECONDS_PER_HOUR
    mu = spec.service_rate / SECONDS_PER_HOUR
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n_arrivals))
    services = rng.exponential(1.0 / mu, n_arrivals)
    skip = int(skip_fraction * n_arrivals)
    return simulate_queue_waits(arrivals, services, spec.servers, skip)

"""Dynamic interlining of buses at a shared hub.

Analytical queueing comparison of pooled versus dedicated fleets,
effective-percentile fleet allocation, exact real-time bus-to-trip
assignment, and a seeded stochastic simulator of hub operations with
reliability metrics and an experiment sweep harness.
"""

from .allocation import (AllocationResult, ServicePlan, allocate,
                         effective_percentile, fleet_size_deficit,
                         fleet_size_even_headway)
from .dispatch import (AssignmentSolution, BusState, DispatchInstance,
                       HubSnapshot, TripRequest, assignment_cost,
                       build_instance, dispatch_dedicated, solve)
from .errors import (ConfigurationError, DomainError, MetricsError,
                     ScenarioValidationError)
from .queueing import (QueueSpec, WaitResult, erlang_c, pooling_comparison,
                       simulate_mmc_wait, wait_ggc, wait_mmc)
from .runtimes import RunTimeModel
from .scenario_io import (ScenarioFile, SweepResult, emit_report,
                          load_scenario_file, parse_scenario, run_sweep,
                          scenario_hash)
from .sim import (DepartureRecord, MetricsReport, Route, RouteMetrics,
                  Scenario, apply_passing_rule, compute_metrics, dwell_time,
                  generate_trip_time, run_scenario)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult", "AssignmentSolution", "BusState", "ConfigurationError",
    "DepartureRecord", "DispatchInstance", "DomainError", "HubSnapshot",
    "MetricsError", "MetricsReport", "QueueSpec", "Route", "RouteMetrics",
    "RunTimeModel", "Scenario", "ScenarioFile", "ScenarioValidationError",
    "ServicePlan", "SweepResult", "TripRequest", "WaitResult", "allocate",
    "apply_passing_rule", "assignment_cost", "build_instance",
    "compute_metrics", "dispatch_dedicated", "dwell_time",
    "effective_percentile", "emit_report", "erlang_c", "fleet_size_deficit",
    "fleet_size_even_headway", "generate_trip_time", "load_scenario_file",
    "parse_scenario", "pooling_comparison", "run_scenario", "run_sweep",
    "scenario_hash", "simulate_mmc_wait", "solve", "wait_ggc", "wait_mmc",
]

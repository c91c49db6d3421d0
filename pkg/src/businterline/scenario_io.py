"""Scenario documents, the experiment sweep harness, and result files.

A scenario file is a JSON document holding one scenario (routes with
published fleet sizes, operating switches, horizon, seed) plus an
optional factor grid.  Parsing is strict: unknown fields are rejected
and every error names the offending path.  Parsing also resolves the
fleet split: the requested shared fleet size is carved out of the
published per-route fleets with the donation algorithm, and each shared
bus remembers its origin terminal.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .allocation import ServicePlan, allocate
from .errors import ConfigurationError, ScenarioValidationError
from .runtimes import RunTimeModel
from .sim import (DEFAULT_DISPATCH_ERROR, MetricsReport, Route, Scenario,
                  dwell_time, records_to_csv, run_scenario, uniform_within_hub,
                  validate_scenario)

SCHEMA_VERSION = 1

FACTOR_NAMES = (
    "shared_fleet_size",
    "within_hub_travel_s",
    "allow_passing",
    "dedicated_mode",
    "strategy",
    "frequency_factor",
    "route_count_factor",
    "runtime_cov_factor",
)

_SCENARIO_FIELDS_REQUIRED = ("routes",)
_SCENARIO_FIELDS_OPTIONAL = (
    "shared_fleet_size", "within_hub_travel_s", "allow_passing",
    "dedicated_mode", "strategy", "threshold_min_delay_s",
    "assignment_penalty_s", "lookahead_k", "design_percentile",
    "dispatch_error_model", "horizon_s", "warmup_s", "time_step_s", "seed",
    "fleet_resolved", "shared_bus_origins",
)
_ROUTE_FIELDS_REQUIRED = ("route_id", "runtime_model", "dedicated_fleet")
_ROUTE_FIELDS_OPTIONAL = (
    "headway_s", "departures_s", "period_s", "ridership_pax_s",
    "dwell_per_pax_s", "dwell_intercept_s",
)
_MODEL_FIELDS = {
    "normal": (("kind", "mean_s", "std_s"), ("floor_s", "cap_s")),
    "lognormal": (("kind", "mean_s", "cov"), ("shift_s", "floor_s", "cap_s")),
    "empirical": (("kind", "samples_s"), ("floor_s", "cap_s")),
}


# ---- validation helpers ------------------------------------------------------

def _check_object(obj, path, required, optional):
    if not isinstance(obj, dict):
        raise ScenarioValidationError(path, "expected an object")
    for key in required:
        if key not in obj:
            raise ScenarioValidationError(path, f"missing required field {key!r}")
    unknown = sorted(set(obj) - set(required) - set(optional))
    if unknown:
        raise ScenarioValidationError(f"{path}.{unknown[0]}", "unknown field")


def _number(obj, key, path, default=None, minimum=None, strict_min=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioValidationError(f"{path}.{key}", "expected a number")
    v = float(v)
    if minimum is not None and v < minimum:
        raise ScenarioValidationError(f"{path}.{key}", f"must be >= {minimum}")
    if strict_min is not None and v <= strict_min:
        raise ScenarioValidationError(f"{path}.{key}", f"must be > {strict_min}")
    return v


def _integer(obj, key, path, default=None, minimum=None):
    if key not in obj:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioValidationError(f"{path}.{key}", "expected an integer")
    if minimum is not None and v < minimum:
        raise ScenarioValidationError(f"{path}.{key}", f"must be >= {minimum}")
    return v


def _boolean(obj, key, path, default):
    if key not in obj:
        return default
    v = obj[key]
    if not isinstance(v, bool):
        raise ScenarioValidationError(f"{path}.{key}", "expected a boolean")
    return v


def _choice(obj, key, path, default, choices):
    if key not in obj:
        return default
    v = obj[key]
    if v not in choices:
        raise ScenarioValidationError(f"{path}.{key}", f"must be one of {sorted(choices)}")
    return v


def _parse_model(doc, path) -> RunTimeModel:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ScenarioValidationError(path, "expected a model object with a 'kind'")
    kind = doc["kind"]
    if kind not in _MODEL_FIELDS:
        raise ScenarioValidationError(f"{path}.kind", f"must be one of {sorted(_MODEL_FIELDS)}")
    required, optional = _MODEL_FIELDS[kind]
    _check_object(doc, path, required, optional)
    try:
        return RunTimeModel.from_dict(doc)
    except (ValueError, TypeError) as exc:
        raise ScenarioValidationError(path, str(exc)) from exc


def _parse_route(doc, path, horizon) -> Route:
    _check_object(doc, path, _ROUTE_FIELDS_REQUIRED, _ROUTE_FIELDS_OPTIONAL)
    rid = doc["route_id"]
    if not isinstance(rid, str) or not rid:
        raise ScenarioValidationError(f"{path}.route_id", "expected a non-empty string")
    has_headway = "headway_s" in doc
    has_departures = "departures_s" in doc
    if has_headway == has_departures:
        raise ScenarioValidationError(path, "give exactly one of headway_s or departures_s")
    period = doc.get("period_s", [0.0, horizon])
    if (not isinstance(period, (list, tuple)) or len(period) != 2
            or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in period)):
        raise ScenarioValidationError(f"{path}.period_s", "expected [start_s, end_s]")
    try:
        if has_headway:
            plan = ServicePlan(
                route_id=rid, mode="even_headway",
                headway=_number(doc, "headway_s", path, strict_min=0.0),
                period=(float(period[0]), float(period[1])),
            )
        else:
            deps = doc["departures_s"]
            if not isinstance(deps, list):
                raise ScenarioValidationError(f"{path}.departures_s", "expected a list")
            plan = ServicePlan(
                route_id=rid, mode="explicit_timetable",
                departures=tuple(float(d) for d in deps),
                period=(float(period[0]), float(period[1])),
            )
    except ValueError as exc:
        raise ScenarioValidationError(path, str(exc)) from exc
    return Route(
        route_id=rid,
        service_plan=plan,
        runtime_model=_parse_model(doc["runtime_model"], f"{path}.runtime_model"),
        ridership=_number(doc, "ridership_pax_s", path, default=0.0, minimum=0.0),
        dwell_per_pax=_number(doc, "dwell_per_pax_s", path, default=0.0, minimum=0.0),
        dwell_intercept=_number(doc, "dwell_intercept_s", path, default=0.0, minimum=0.0),
        dedicated_fleet=_integer(doc, "dedicated_fleet", path, minimum=0),
    )


def _parse_within_hub(value, path, routes) -> tuple:
    n = len(routes)
    if value is None:
        return uniform_within_hub(n, 0.0)
    if isinstance(value, bool):
        raise ScenarioValidationError(path, "expected a number or a route-by-route object")
    if isinstance(value, (int, float)):
        if value < 0:
            raise ScenarioValidationError(path, "must be >= 0")
        return uniform_within_hub(n, float(value))
    if not isinstance(value, dict):
        raise ScenarioValidationError(path, "expected a number or a route-by-route object")
    ids = [r.route_id for r in routes]
    for src, row in value.items():
        if src not in ids:
            raise ScenarioValidationError(f"{path}.{src}", "unknown route")
        if not isinstance(row, dict):
            raise ScenarioValidationError(f"{path}.{src}", "expected an object")
        for dst in row:
            if dst not in ids:
                raise ScenarioValidationError(f"{path}.{src}.{dst}", "unknown route")
    matrix = []
    for a in ids:
        row = []
        for b in ids:
            v = value.get(a, {}).get(b, 0.0)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ScenarioValidationError(f"{path}.{a}.{b}", "must be a number >= 0")
            if a == b and v != 0:
                raise ScenarioValidationError(f"{path}.{a}.{b}", "diagonal must be 0")
            row.append(float(v))
        matrix.append(tuple(row))
    return tuple(matrix)


# ---- fleet resolution ----------------------------------------------------------

def total_runtime_model(route: Route) -> RunTimeModel:
    """Moving-time model shifted by the dwell at the scheduled headway,
    approximating the full round-trip duration used for fleet sizing."""
    nominal = dwell_time(route, route.service_plan.nominal_headway())
    return route.runtime_model.shifted(nominal)


def resolve_fleet(routes, shared_fleet_size, design_percentile):
    """Split published fleets into dedicated counts plus a shared pool.

    Runs the donation algorithm with a one-bus floor; if the target is
    larger than the floor allows (the all-shared end of a sweep), the
    remaining buses are stripped in route order.  Returns (dedicated
    counts by route, shared bus origins in rank order, donation trace).
    """
    design = {r.route_id: r.dedicated_fleet for r in routes}
    if shared_fleet_size == 0:
        return dict(design), (), ()
    pairs = [(r.service_plan, total_runtime_model(r)) for r in routes]
    cap = sum(max(0, n - 1) for n in design.values())
    first = min(shared_fleet_size, cap)
    if first > 0:
        result = allocate(pairs, first, design_percentile, initial_fleets=design)
        dedicated = dict(result.dedicated)
        trace = list(result.trace)
    else:
        dedicated = dict(design)
        trace = []
    remaining = shared_fleet_size - first
    step = len(trace)
    while remaining > 0:
        for r in routes:
            if remaining == 0:
                break
            if dedicated[r.route_id] > 0:
                dedicated[r.route_id] -= 1
                step += 1
                trace.append((step, r.route_id, 0.0))
                remaining -= 1
    origins = []
    for r in routes:
        origins.extend([r.route_id] * (design[r.route_id] - dedicated[r.route_id]))
    return dedicated, tuple(origins), tuple(trace)


# ---- scenario parsing ------------------------------------------------------------

def parse_scenario(document: dict) -> Scenario:
    """Validate a scenario document, resolve all defaults and the fleet
    split, and return a runnable Scenario."""
    path = "scenario"
    _check_object(document, path, _SCENARIO_FIELDS_REQUIRED, _SCENARIO_FIELDS_OPTIONAL)

    horizon = _number(document, "horizon_s", path, default=9000.0, strict_min=0.0)
    routes_doc = document["routes"]
    if not isinstance(routes_doc, list) or not routes_doc:
        raise ScenarioValidationError(f"{path}.routes", "expected a non-empty list")
    routes = [
        _parse_route(rd, f"{path}.routes[{i}]", horizon)
        for i, rd in enumerate(routes_doc)
    ]
    ids = [r.route_id for r in routes]
    if len(set(ids)) != len(ids):
        raise ScenarioValidationError(f"{path}.routes", "route ids must be unique")

    total = sum(r.dedicated_fleet for r in routes)
    resolved = _boolean(document, "fleet_resolved", path, False)
    shared = _integer(document, "shared_fleet_size", path, default=0, minimum=0)
    if resolved:
        total += shared
    if shared > total:
        raise ScenarioValidationError(
            f"{path}.shared_fleet_size",
            f"asks for {shared} shared buses but the fleet has only {total}",
        )

    design_percentile = _number(document, "design_percentile", path, default=0.95)
    if not 0.0 < design_percentile < 1.0:
        raise ScenarioValidationError(f"{path}.design_percentile", "must be inside (0, 1)")

    if resolved:
        origins_doc = document.get("shared_bus_origins")
        if origins_doc is None:
            origins_doc = []
        if not isinstance(origins_doc, list) or len(origins_doc) != shared:
            raise ScenarioValidationError(
                f"{path}.shared_bus_origins",
                f"expected a list of {shared} route ids",
            )
        for k, origin in enumerate(origins_doc):
            if origin not in ids:
                raise ScenarioValidationError(
                    f"{path}.shared_bus_origins[{k}]", f"unknown route {origin!r}"
                )
        dedicated = {r.route_id: r.dedicated_fleet for r in routes}
        origins = tuple(origins_doc)
    else:
        if "shared_bus_origins" in document:
            raise ScenarioValidationError(
                f"{path}.shared_bus_origins",
                "only allowed together with fleet_resolved",
            )
        dedicated, origins, _ = resolve_fleet(routes, shared, design_percentile)
    routes = [replace(r, dedicated_fleet=dedicated[r.route_id]) for r in routes]

    design_counts = {rid: dedicated[rid] for rid in ids}
    for origin in origins:
        design_counts[origin] += 1
    default_warmup = min(
        max(design_counts[r.route_id] * r.service_plan.nominal_headway()
            for r in routes),
        horizon / 2.0,
    )
    warmup = _number(document, "warmup_s", path, default=default_warmup, minimum=0.0)
    if warmup >= horizon:
        raise ScenarioValidationError(f"{path}.warmup_s", "must be below horizon_s")

    error_doc = document.get("dispatch_error_model")
    error_model = (DEFAULT_DISPATCH_ERROR if error_doc is None
                   else _parse_model(error_doc, f"{path}.dispatch_error_model"))

    scenario = Scenario(
        routes=tuple(routes),
        shared_fleet_size=shared,
        shared_bus_origins=origins,
        within_hub_travel=_parse_within_hub(
            document.get("within_hub_travel_s"), f"{path}.within_hub_travel_s", routes
        ),
        allow_passing=_boolean(document, "allow_passing", path, True),
        dedicated_mode=_choice(document, "dedicated_mode", path, "scheduled",
                               ("scheduled", "schedule_free")),
        dispatch_error_model=error_model,
        horizon=horizon,
        warmup=warmup,
        time_step=_number(document, "time_step_s", path, default=1.0, strict_min=0.0),
        seed=_integer(document, "seed", path, default=0),
        strategy=_choice(document, "strategy", path, "optimal",
                         ("optimal", "fcfs", "threshold")),
        threshold_min_delay=_number(document, "threshold_min_delay_s", path,
                                    default=0.0, minimum=0.0),
        penalty=_number(document, "assignment_penalty_s", path,
                        default=86400.0, strict_min=0.0),
        lookahead=_integer(document, "lookahead_k", path, default=3, minimum=1),
    )
    try:
        validate_scenario(scenario)
    except ConfigurationError as exc:
        raise ScenarioValidationError(path, str(exc)) from exc
    return scenario


def emit_scenario_document(scenario: Scenario) -> dict:
    """Serialize a Scenario in fully resolved form; parsing it back
    reproduces an equal Scenario."""
    routes = []
    for r in scenario.routes:
        plan = r.service_plan
        rd: dict = {"route_id": r.route_id}
        if plan.mode == "even_headway":
            rd["headway_s"] = plan.headway
        else:
            rd["departures_s"] = list(plan.departures)
        if plan.period != (0.0, scenario.horizon):
            rd["period_s"] = [plan.period[0], plan.period[1]]
        rd["runtime_model"] = r.runtime_model.to_dict()
        rd["ridership_pax_s"] = r.ridership
        rd["dwell_per_pax_s"] = r.dwell_per_pax
        rd["dwell_intercept_s"] = r.dwell_intercept
        rd["dedicated_fleet"] = r.dedicated_fleet
        routes.append(rd)
    ids = [r.route_id for r in scenario.routes]
    return {
        "routes": routes,
        "shared_fleet_size": scenario.shared_fleet_size,
        "fleet_resolved": True,
        "shared_bus_origins": list(scenario.shared_bus_origins),
        "within_hub_travel_s": {
            a: {b: scenario.within_hub_travel[i][j] for j, b in enumerate(ids)}
            for i, a in enumerate(ids)
        },
        "allow_passing": scenario.allow_passing,
        "dedicated_mode": scenario.dedicated_mode,
        "strategy": scenario.strategy,
        "threshold_min_delay_s": scenario.threshold_min_delay,
        "assignment_penalty_s": scenario.penalty,
        "lookahead_k": scenario.lookahead,
        "dispatch_error_model": scenario.dispatch_error_model.to_dict(),
        "horizon_s": scenario.horizon,
        "warmup_s": scenario.warmup,
        "time_step_s": scenario.time_step,
        "seed": scenario.seed,
    }


def scenario_hash(scenario: Scenario) -> str:
    """Stable digest of the fully resolved scenario."""
    canonical = json.dumps(emit_scenario_document(scenario), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


# ---- scenario files ----------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioFile:
    scenario_doc: dict
    sweep: dict | None = None

    def __post_init__(self):
        if self.sweep is not None:
            for name, values in self.sweep.items():
                if name not in FACTOR_NAMES:
                    raise ScenarioValidationError(
                        f"sweep.{name}",
                        f"unknown factor; expected one of {sorted(FACTOR_NAMES)}",
                    )
                if not isinstance(values, list) or not values:
                    raise ScenarioValidationError(f"sweep.{name}", "expected a non-empty list")


def load_scenario_file(path) -> ScenarioFile:
    with open(path) as fh:
        doc = json.load(fh)
    _check_object(doc, "file", ("schema_version", "scenario"), ("sweep",))
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ScenarioValidationError(
            "file.schema_version", f"expected {SCHEMA_VERSION}, got {doc['schema_version']}"
        )
    return ScenarioFile(scenario_doc=doc["scenario"], sweep=doc.get("sweep"))


def bundled_path(name: str) -> Path:
    """Path to one of the scenario files shipped with the package."""
    return Path(__file__).parent / "data" / name


# ---- factor application -------------------------------------------------------------

def _scaled_fleet(route_doc, factor_path, design_percentile) -> int:
    model = _parse_model(route_doc["runtime_model"], f"{factor_path}.runtime_model")
    probe = Route(
        route_id=route_doc["route_id"],
        service_plan=ServicePlan(route_id=route_doc["route_id"],
                                 headway=float(route_doc["headway_s"])),
        runtime_model=model,
        ridership=float(route_doc.get("ridership_pax_s", 0.0)),
        dwell_per_pax=float(route_doc.get("dwell_per_pax_s", 0.0)),
        dwell_intercept=float(route_doc.get("dwell_intercept_s", 0.0)),
    )
    cycle = total_runtime_model(probe).quantile(design_percentile)
    return max(1, int(math.ceil(cycle / probe.service_plan.headway - 1e-9)))


def apply_factors(scenario_doc: dict, point: dict) -> dict:
    """Return a copy of the scenario document with one grid point applied."""
    doc = json.loads(json.dumps(scenario_doc))
    if "route_count_factor" in point:
        k = int(point["route_count_factor"])
        if k < 1:
            raise ScenarioValidationError("sweep.route_count_factor", "must be >= 1")
        base_routes = doc["routes"]
        for copy_n in range(2, k + 1):
            for rd in json.loads(json.dumps(base_routes)):
                rd["route_id"] = f"{rd['route_id']}x{copy_n}"
                doc["routes"].append(rd)
    if "frequency_factor" in point:
        f = float(point["frequency_factor"])
        if f <= 0:
            raise ScenarioValidationError("sweep.frequency_factor", "must be > 0")
        for rd in doc["routes"]:
            if "headway_s" not in rd:
                raise ScenarioValidationError(
                    "sweep.frequency_factor", "needs even-headway routes"
                )
            rd["headway_s"] = rd["headway_s"] / f
        if f != 1.0:
            # service level changed: regenerate fleet sizes from the run times
            pct = float(doc.get("design_percentile", 0.95))
            for i, rd in enumerate(doc["routes"]):
                rd["dedicated_fleet"] = _scaled_fleet(rd, f"scenario.routes[{i}]", pct)
    if "runtime_cov_factor" in point:
        f = float(point["runtime_cov_factor"])
        for rd in doc["routes"]:
            model = _parse_model(rd["runtime_model"], "scenario.routes[].runtime_model")
            rd["runtime_model"] = model.scale_cov(f).to_dict()
    if "within_hub_travel_s" in point:
        doc["within_hub_travel_s"] = point["within_hub_travel_s"]
    if "allow_passing" in point:
        doc["allow_passing"] = point["allow_passing"]
    if "dedicated_mode" in point:
        doc["dedicated_mode"] = point["dedicated_mode"]
    if "strategy" in point:
        doc["strategy"] = point["strategy"]
    if "shared_fleet_size" in point:
        v = point["shared_fleet_size"]
        if v == "all":
            v = sum(rd["dedicated_fleet"] for rd in doc["routes"])
        doc["shared_fleet_size"] = int(v)
    return doc


# ---- sweep harness ---------------------------------------------------------------------

@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    factor_names: tuple
    replications: int
    base_seed: int


def _flatten_metrics(report: MetricsReport) -> dict:
    flat = {}
    for key, value in report.system.to_dict().items():
        flat[f"system_{key}"] = value
    for rid, metrics in report.per_route.items():
        for key, value in metrics.to_dict().items():
            flat[f"route_{rid}_{key}"] = value
    return flat


def _sweep_worker(args) -> dict:
    base_doc, point, replication, seed, factor_names = args
    row = {name: point.get(name, "") for name in factor_names}
    row["replication"] = replication
    row["seed"] = seed
    row["scenario_hash"] = ""
    try:
        doc = apply_factors(base_doc, point)
        scenario = replace(parse_scenario(doc), seed=seed)
        row["scenario_hash"] = scenario_hash(scenario)
        report, _ = run_scenario(scenario)
    except Exception as exc:  # a failed run is recorded, not fatal
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
        return row
    row["status"] = "ok"
    row["error"] = ""
    row.update(_flatten_metrics(report))
    return row


def run_sweep(scenario_file: ScenarioFile, replications: int = 1,
              parallelism: int = 1, base_seed: int | None = None) -> SweepResult:
    """Expand the factor grid and simulate every (point, replication).

    Replication seeds are base seed plus the replication index.  Rows
    come back in grid order regardless of the parallelism level, so the
    output is byte-stable for a fixed base seed.
    """
    if replications < 1:
        raise ConfigurationError("replications must be >= 1")
    if parallelism < 1:
        raise ConfigurationError("parallelism must be >= 1")
    sweep = scenario_file.sweep or {}
    factor_names = tuple(sorted(sweep))
    if base_seed is None:
        base_seed = int(scenario_file.scenario_doc.get("seed", 0))

    points = [dict(zip(factor_names, combo))
              for combo in itertools.product(*(sweep[n] for n in factor_names))]
    if not points:
        points = [{}]

    jobs = []
    for point in points:
        for rep in range(replications):
            jobs.append((scenario_file.scenario_doc, point, rep,
                         base_seed + rep, factor_names))

    if parallelism == 1 or len(jobs) == 1:
        rows = [_sweep_worker(job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            rows = list(pool.map(_sweep_worker, jobs))

    return SweepResult(rows=tuple(rows), factor_names=factor_names,
                       replications=replications, base_seed=base_seed)


# ---- report emission ----------------------------------------------------------------------

_ROW_LEAD = ("scenario_hash",)
_ROW_META = ("replication", "seed", "status", "error")


def _metric_columns(rows) -> list[str]:
    cols = set()
    for row in rows:
        cols.update(k for k in row if k.startswith(("system_", "route_")))
    return sorted(cols)


def _ci95_half_width(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(stats.t.ppf(0.975, len(values) - 1) * np.std(values, ddof=1)
                 / math.sqrt(len(values)))


def emit_report(result: SweepResult, out_dir) -> dict:
    """Write runs.csv, summary.json, and plot-ready curve tables.

    Emission is a pure function of the SweepResult: writing the same
    result twice produces byte-identical files.
    """
    if not result.rows:
        raise ConfigurationError("cannot emit a report for an empty sweep result")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metric_cols = _metric_columns(result.rows)
    fieldnames = (list(_ROW_LEAD) + list(result.factor_names)
                  + list(_ROW_META) + metric_cols)

    paths = {"runs": out / "runs.csv"}
    with open(paths["runs"], "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, restval="",
                                lineterminator="\n")
        writer.writeheader()
        for row in result.rows:
            writer.writerow(row)

    groups: dict[tuple, list] = {}
    for row in result.rows:
        key = tuple(row.get(name, "") for name in result.factor_names)
        groups.setdefault(key, []).append(row)

    summary = []
    for key, rows in groups.items():
        ok = [r for r in rows if r.get("status") == "ok"]
        entry = {
            "factors": dict(zip(result.factor_names, key)),
            "replications": len(rows),
            "completed": len(ok),
            "metrics": {},
        }
        for col in metric_cols:
            values = np.array([r[col] for r in ok if col in r], dtype=float)
            if len(values) == 0:
                continue
            entry["metrics"][col] = {
                "mean": float(np.mean(values)),
                "ci95_half_width": _ci95_half_width(values),
            }
        summary.append(entry)
    paths["summary"] = out / "summary.json"
    with open(paths["summary"], "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if "shared_fleet_size" in result.factor_names:
        for fname, col in (("delay_vs_shared_fleet.csv", "system_mean_delay_s"),
                           ("cov_vs_shared_fleet.csv", "system_headway_cov")):
            path = out / fname
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(["shared_fleet_size", col])
                for entry in summary:
                    if col in entry["metrics"]:
                        writer.writerow([entry["factors"]["shared_fleet_size"],
                                         entry["metrics"][col]["mean"]])
            paths[fname.removesuffix(".csv")] = path
    return paths


# ---- single-run output -----------------------------------------------------------------------

def run_single(scenario: Scenario, out_dir) -> dict:
    """Run one scenario; write departures.csv and metrics.json."""
    report, records = run_scenario(scenario)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"departures": out / "departures.csv", "metrics": out / "metrics.json"}
    with open(paths["departures"], "w", newline="") as fh:
        records_to_csv(records, fh)
    with open(paths["metrics"], "w") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return paths

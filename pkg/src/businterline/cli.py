"""Command line surface.

Exit codes: 0 on success, 1 on validation/domain errors, 2 on runtime
failures.  BUSINTERLINE_OUT, when set, overrides any --out directory.
"""

from __future__ import annotations

import csv
import json
import os
import sys
from dataclasses import replace

import click

from . import dispatch as dispatch_mod
from . import queueing, scenario_io
from .allocation import allocate
from .errors import ConfigurationError, DomainError, MetricsError


def _out_dir(cli_value: str) -> str:
    return os.environ.get("BUSINTERLINE_OUT") or cli_value


def _fail(exc: BaseException) -> None:
    click.echo(f"error: {exc}", err=True)
    if isinstance(exc, (ConfigurationError, DomainError)):
        sys.exit(1)
    sys.exit(2)


@click.group()
def main():
    """Dynamic interlining toolkit: queue analysis, fleet allocation,
    dispatch optimization, and hub operations simulation."""


@main.group(invoke_without_command=True)
@click.option("-c", "--servers", type=int, default=None, help="Number of buses (servers).")
@click.option("--lam", "arrival_rate", type=float, default=None,
              help="Trips per hour (arrival rate).")
@click.option("--mu", "service_rate", type=float, default=None,
              help="Trips per hour one bus can serve (service rate).")
@click.option("--ca", "cv_arrival", type=float, default=0.0,
              help="Coefficient of variation of inter-arrival times.")
@click.option("--cs", "cv_service", type=float, default=0.0,
              help="Coefficient of variation of service (run) times.")
@click.pass_context
def queue(ctx, servers, arrival_rate, service_rate, cv_arrival, cv_service):
    """Wait-time analysis of the hub departure queue."""
    if ctx.invoked_subcommand is not None:
        return
    if servers is None or arrival_rate is None or service_rate is None:
        raise click.UsageError("queue needs --servers, --lam, and --mu")
    try:
        spec = queueing.QueueSpec(servers, arrival_rate, service_rate,
                                  cv_arrival, cv_service)
        result = queueing.wait_ggc(spec)
    except DomainError as exc:
        _fail(exc)
    click.echo(json.dumps(result.to_dict(), sort_keys=True))


@queue.command("sweep")
@click.option("--routes", default="1,2,3,4,5",
              help="Comma-separated route counts to pool.")
@click.option("--utilizations", default="0.7,0.75,0.8,0.85,0.9",
              help="Comma-separated utilization ratios.")
@click.option("-c", "--servers-per-route", type=int, default=12)
@click.option("--mu", "service_rate", type=float, default=1.0)
@click.option("--cs", "cv_service", type=float, default=0.15)
def queue_sweep(routes, utilizations, servers_per_route, service_rate, cv_service):
    """CSV of (route count, utilization, pooled wait seconds)."""
    try:
        counts = [int(x) for x in routes.split(",") if x]
        rhos = [float(x) for x in utilizations.split(",") if x]
        rows = queueing.pooling_sweep(counts, rhos, servers_per_route,
                                      service_rate, cv_service)
    except (ValueError, DomainError) as exc:
        _fail(exc)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["routes", "utilization", "wait_seconds"])
    writer.writerows(rows)


@main.command("allocate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--shared", "shared_target", type=int, required=True,
              help="Number of buses to move into the shared fleet.")
def allocate_cmd(config_path, shared_target):
    """Split a scenario's fleet into dedicated counts plus a shared pool."""
    try:
        sf = scenario_io.load_scenario_file(config_path)
        scenario = scenario_io.parse_scenario(sf.scenario_doc)
        design = {r.route_id: r.dedicated_fleet for r in scenario.routes}
        for origin in scenario.shared_bus_origins:
            design[origin] += 1
        pairs = [(r.service_plan, scenario_io.total_runtime_model(r))
                 for r in scenario.routes]
        result = allocate(pairs, shared_target,
                          initial_fleets=design)
    except (ConfigurationError, DomainError) as exc:
        _fail(exc)
    click.echo(json.dumps({
        "dedicated": result.dedicated,
        "shared_fleet_size": result.shared_fleet_size,
        "trace": [{"step": s, "donor": r, "effective_percentile": p}
                  for s, r, p in result.trace],
    }, sort_keys=True))


@main.command("dispatch")
@click.option("--instance", "instance_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
def dispatch_cmd(instance_path):
    """Solve one dispatch assignment instance from a JSON file."""
    try:
        solution = dispatch_mod.solve_file(instance_path)
    except (ConfigurationError, DomainError, KeyError, json.JSONDecodeError) as exc:
        _fail(exc)
    click.echo(json.dumps(solution, sort_keys=True))


@main.command("simulate")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Override the scenario seed.")
@click.option("--out", "out_dir", default="out", show_default=True)
def simulate_cmd(config_path, seed, out_dir):
    """Run one scenario; write departures.csv and metrics.json."""
    try:
        sf = scenario_io.load_scenario_file(config_path)
        scenario = scenario_io.parse_scenario(sf.scenario_doc)
        if seed is not None:
            scenario = replace(scenario, seed=seed)
        paths = scenario_io.run_single(scenario, _out_dir(out_dir))
    except (ConfigurationError, DomainError) as exc:
        _fail(exc)
    except MetricsError as exc:
        _fail(exc)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


@main.command("sweep")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--replications", type=int, default=1, show_default=True)
@click.option("--jobs", type=int, default=1, show_default=True,
              help="Parallel worker processes.")
@click.option("--seed", "base_seed", type=int, default=None,
              help="Base seed; replication i runs with seed base+i.")
@click.option("--out", "out_dir", default="out", show_default=True)
def sweep_cmd(config_path, replications, jobs, base_seed, out_dir):
    """Expand the factor grid of a scenario file and simulate every point."""
    try:
        sf = scenario_io.load_scenario_file(config_path)
        result = scenario_io.run_sweep(sf, replications=replications,
                                       parallelism=jobs, base_seed=base_seed)
        paths = scenario_io.emit_report(result, _out_dir(out_dir))
    except (ConfigurationError, DomainError) as exc:
        _fail(exc)
    failed = sum(1 for row in result.rows if row.get("status") != "ok")
    for name, path in paths.items():
        click.echo(f"{name}: {path}")
    if failed:
        click.echo(f"{failed} of {len(result.rows)} runs failed", err=True)
        sys.exit(2)


if __name__ == "__main__":
    main()

"""Operator command line: simulate, replay, serve, plan, verify-report."""

from __future__ import annotations

import json
import os
import sys
import threading

import click

from .config import ConfigError, load_config
from .core import GeoCoordinate
from .report import LogError, build_report, compare_reports, read_log, write_log, write_report
from .routing import (
    BRUTE_FORCE_MAX_STOPS, RoutingError, RoutingProblem,
    brute_force_optimum, nearest_neighbor, two_opt,
)
from .simulation import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CORRUPT_LOG = 4
EXIT_BIND = 5
EXIT_TOO_LARGE = 6
EXIT_REPORT_MISMATCH = 7

EXIT_CODES_HELP = """\b
Exit codes:
  0  success
  2  config validation failed (all violations listed)
  3  I/O failure
  4  corrupt or unreadable event log
  5  address bind failure
  6  problem too large for the brute-force oracle
  7  report does not match its event log
"""


@click.group(epilog=EXIT_CODES_HELP)
def main():
    """Smart waste fleet tools: simulate scenarios, replay logs, plan
    routes, and serve the monitoring center."""


def _load_config_or_exit(path: str):
    try:
        return load_config(path)
    except ConfigError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"cannot read config: {exc}", err=True)
        sys.exit(EXIT_IO)


def _print_summary(report: dict) -> None:
    totals = report["totals"]
    rows = [
        ("deposits", totals["deposits"], f"{totals['deposited_l']:.1f} L"),
        ("collections", totals["collections"], f"{totals['collected_l']:.1f} L"),
        ("overflows", totals["overflows"], f"{totals['overflowed_l']:.1f} L"),
        ("messages sent", totals["messages_sent"], f"{totals['retransmissions']} retransmits"),
        ("messages delivered", totals["messages_delivered"],
         f"{totals['messages_lost']} lost, {totals['messages_duplicated']} duplicated"),
        ("orders", totals["orders_created"], f"{totals['orders_done']} done"),
    ]
    click.echo(f"scenario {report['scenario_id']} (seed {report['seed']})")
    for name, count, extra in rows:
        click.echo(f"  {name:<20} {count:>8}  {extra}")
    click.echo(f"  alerts by cause      {json.dumps(report['alerts_by_cause'])}")
    latency = report["mean_alert_to_collection_latency_ms"]
    if latency is not None:
        click.echo(f"  mean alert->collect  {latency / 60000.0:>8.1f}  minutes")
    click.echo(f"  truck distance       {report['total_truck_distance_m'] / 1000.0:>8.1f}  km")
    click.echo(f"  final state hash     {report['final_state_hash']}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(), help="Scenario JSON file.")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
def simulate(config_path: str, out_dir: str):
    """Run a scenario; writes events.ndjson and report.json to --out."""
    config = _load_config_or_exit(config_path)
    result = run_scenario(config)
    header = result.lines[0]
    events = [ln for ln in result.lines if ln.get("type") == "event"]
    report = build_report(header, events)
    try:
        os.makedirs(out_dir, exist_ok=True)
        write_log(os.path.join(out_dir, "events.ndjson"), result.lines)
        write_report(os.path.join(out_dir, "report.json"), report)
    except OSError as exc:
        click.echo(f"cannot write outputs: {exc}", err=True)
        sys.exit(EXIT_IO)
    _print_summary(report)


@main.command()
@click.argument("log_path", type=click.Path())
def replay(log_path: str):
    """Rebuild the final state from an event log and print its summary."""
    try:
        header, events = read_log(log_path)
    except LogError as exc:
        click.echo(f"corrupt log: {exc}", err=True)
        sys.exit(EXIT_CORRUPT_LOG)
    except OSError as exc:
        click.echo(f"cannot read log: {exc}", err=True)
        sys.exit(EXIT_IO)
    report = build_report(header, events)
    _print_summary(report)


@main.command()
@click.argument("problem_path", type=click.Path())
@click.option("--oracle", is_flag=True, help="Also run the exhaustive search (<= 10 stops).")
def plan(problem_path: str, oracle: bool):
    """Plan a collection tour for a problem file (depot + stops JSON)."""
    try:
        with open(problem_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        click.echo(f"cannot read problem: {exc}", err=True)
        sys.exit(EXIT_IO)
    except json.JSONDecodeError as exc:
        click.echo(f"problem file is not valid JSON: {exc.msg}", err=True)
        sys.exit(EXIT_CONFIG)
    try:
        depot = GeoCoordinate(raw["depot"]["lat"], raw["depot"]["lon"])
        stops = [(s["id"], GeoCoordinate(s["lat"], s["lon"])) for s in raw["stops"]]
    except (KeyError, TypeError) as exc:
        click.echo(f"problem file needs depot{{lat,lon}} and stops[{{id,lat,lon}}]: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if oracle and len(stops) > BRUTE_FORCE_MAX_STOPS:
        click.echo(f"TOO_LARGE: {len(stops)} stops exceeds the oracle cap of {BRUTE_FORCE_MAX_STOPS}", err=True)
        sys.exit(EXIT_TOO_LARGE)

    problem = RoutingProblem.build(depot, stops)
    try:
        nn = nearest_neighbor(problem)
    except RoutingError as exc:
        click.echo(str(exc), err=True)
        sys.exit(EXIT_CONFIG)
    improved = two_opt(nn, problem)
    click.echo(f"nearest-neighbor: {' -> '.join(nn.stop_ids)}  ({nn.length_m / 1000.0:.3f} km)")
    click.echo(f"2-opt:            {' -> '.join(improved.stop_ids)}  ({improved.length_m / 1000.0:.3f} km)")
    if oracle:
        best = brute_force_optimum(problem)
        click.echo(f"optimum:          {' -> '.join(best.stop_ids)}  ({best.length_m / 1000.0:.3f} km)")
        gap = (improved.length_m - best.length_m) / best.length_m * 100.0 if best.length_m else 0.0
        click.echo(f"2-opt gap to optimum: {gap:.2f}%")


@main.command("verify-report")
@click.argument("out_dir", type=click.Path())
def verify_report(out_dir: str):
    """Recompute report.json from events.ndjson and compare."""
    log_path = os.path.join(out_dir, "events.ndjson")
    report_path = os.path.join(out_dir, "report.json")
    try:
        header, events = read_log(log_path)
    except LogError as exc:
        click.echo(f"corrupt log: {exc}", err=True)
        sys.exit(EXIT_CORRUPT_LOG)
    except OSError as exc:
        click.echo(f"cannot read log: {exc}", err=True)
        sys.exit(EXIT_IO)
    try:
        with open(report_path, "r", encoding="utf-8") as fh:
            stored = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        click.echo(f"cannot read report: {exc}", err=True)
        sys.exit(EXIT_IO)
    recomputed = build_report(header, events)
    mismatches = compare_reports(stored, recomputed)
    if mismatches:
        click.echo("report does not match its event log:", err=True)
        for m in mismatches:
            click.echo(f"  - {m}", err=True)
        sys.exit(EXIT_REPORT_MISMATCH)
    click.echo("report verified: totals match the event log")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--telemetry", "telemetry_addr", default="127.0.0.1:7788", show_default=True,
              help="host:port for the bin telemetry stream listener.")
@click.option("--http", "http_addr", default="127.0.0.1:8080", show_default=True,
              help="host:port for the operator/public HTTP API.")
@click.option("--out", "out_dir", default="serve-out", show_default=True,
              help="Directory for events.ndjson and snapshot.json.")
@click.option("--drive", is_flag=True,
              help="Drive the scenario simulation live against the wall clock.")
@click.option("--speedup", default=60.0, show_default=True,
              help="Simulated ms per wall ms in --drive mode.")
def serve(config_path: str, telemetry_addr: str, http_addr: str, out_dir: str,
          drive: bool, speedup: float):
    """Run the monitoring center: telemetry listener plus HTTP API."""
    import uvicorn

    from .server import CenterHost, TelemetryServer, check_bindable, create_app, parse_addr

    config = _load_config_or_exit(config_path)
    tele = parse_addr(telemetry_addr)
    http = parse_addr(http_addr)
    for addr in (tele, http):
        if not check_bindable(addr):
            click.echo(f"cannot bind {addr[0]}:{addr[1]}", err=True)
            sys.exit(EXIT_BIND)

    host = CenterHost(config, out_dir, drive=drive, speedup=speedup)
    telemetry_server = TelemetryServer(tele, host)
    tele_thread = threading.Thread(target=telemetry_server.serve_forever,
                                   name="telemetry-listener", daemon=True)
    tele_thread.start()
    host.start_background()
    app = create_app(host)
    click.echo(f"telemetry on {tele[0]}:{tele[1]}, HTTP on {http[0]}:{http[1]}"
               + (f", driving scenario at {speedup:g}x" if drive else ""))
    try:
        uvicorn.run(app, host=http[0], port=http[1], log_level="warning")
    finally:
        telemetry_server.shutdown()
        host.shutdown()
        click.echo(f"snapshot written to {host.snapshot_path}")


if __name__ == "__main__":
    main()

"""Event-log persistence and run reports.

The report is a pure function of the event log, so a verification pass can
always recompute and compare it. Log files are newline-delimited JSON with
a mandatory header line.
"""

from __future__ import annotations

import json

from .monitoring import DISPATCH_CAUSES, MonitoringCenter

MISSING_HEADER = "MISSING_HEADER"
MALFORMED_LINE = "MALFORMED_LINE"
BAD_VERSION = "BAD_VERSION"

_DISPATCH_CAUSE_VALUES = tuple(c.value for c in DISPATCH_CAUSES)


class LogError(ValueError):
    def __init__(self, category: str, line_no: int, message: str):
        super().__init__(f"{category} at line {line_no}: {message}")
        self.category = category
        self.line_no = line_no


def dump_line(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def write_log(path, lines) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(dump_line(line))


def read_log(path) -> tuple[dict, list[dict]]:
    """Parse a log file into (header, events); corrupt lines name themselves."""
    header: dict | None = None
    events: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise LogError(MALFORMED_LINE, line_no, exc.msg) from exc
            if line_no == 1:
                if not isinstance(obj, dict) or obj.get("type") != "log_header":
                    raise LogError(MISSING_HEADER, 1, "first line must be a log_header")
                if obj.get("version") != 1:
                    raise LogError(BAD_VERSION, 1, f"unsupported log version {obj.get('version')!r}")
                header = obj
                continue
            if not isinstance(obj, dict) or obj.get("type") != "event":
                raise LogError(MALFORMED_LINE, line_no, "expected an event line")
            if "at" not in obj or "kind" not in obj:
                raise LogError(MALFORMED_LINE, line_no, "event line missing 'at' or 'kind'")
            events.append(obj)
    if header is None:
        raise LogError(MISSING_HEADER, 1, "log file is empty")
    return header, events


def build_report(header: dict, events: list[dict]) -> dict:
    """Fold the event log into the run report."""
    totals = {
        "deposits": 0, "deposited_l": 0.0,
        "collections": 0, "collected_l": 0.0,
        "overflows": 0, "overflowed_l": 0.0,
        "messages_sent": 0, "retransmissions": 0,
        "messages_delivered": 0, "messages_lost": 0, "messages_duplicated": 0,
        "acks_delivered": 0,
        "ingest_accepted": 0, "ingest_duplicate": 0,
        "ingest_stale_seq": 0, "ingest_unknown_bin": 0,
        "orders_created": 0, "orders_done": 0,
        "low_battery_events": 0, "link_degraded_events": 0,
    }
    alerts_by_cause: dict[str, int] = {}
    per_bin_max_fill: dict[str, float] = {}
    truck_speeds: dict[str, float] = {}
    scenario_id = None
    pending_alerts: dict[str, list[int]] = {}
    latencies: list[int] = []
    max_order_travel_ms: float | None = None
    total_truck_distance = 0.0

    for event in events:
        kind = event["kind"]
        p = event.get("payload") or {}
        at = event["at"]
        if kind == "START":
            scenario_id = p.get("scenario_id")
        elif kind == "CENTER_INIT":
            for t in p.get("trucks", []):
                truck_speeds[t["truck_id"]] = t["speed_kmh"]
        elif kind == "DEPOSIT":
            totals["deposits"] += 1
            totals["deposited_l"] += p["volume_l"]
        elif kind == "OVERFLOW":
            totals["overflows"] += 1
            totals["overflowed_l"] += p["spilled_l"]
        elif kind == "COLLECT":
            totals["collections"] += 1
            totals["collected_l"] += p["volume_l"] or 0.0
            for t in pending_alerts.pop(p["bin_id"], []):
                latencies.append(at - t)
        elif kind == "SENSOR_READ":
            fill = p.get("vote_fill")
            if fill is not None:
                bin_id = p["bin_id"]
                if fill > per_bin_max_fill.get(bin_id, -1.0):
                    per_bin_max_fill[bin_id] = fill
        elif kind == "SEND":
            totals["messages_sent"] += 1
        elif kind == "RESEND":
            totals["retransmissions"] += 1
        elif kind == "DELIVER":
            totals["messages_delivered"] += 1
            result = p.get("result", "").lower()
            key = f"ingest_{result}"
            if key in totals:
                totals[key] += 1
        elif kind == "CHANNEL_DROP":
            if p.get("direction") == "up":
                totals["messages_lost"] += 1
        elif kind == "CHANNEL_DUP":
            if p.get("direction") == "up":
                totals["messages_duplicated"] += 1
        elif kind == "ACK":
            totals["acks_delivered"] += 1
        elif kind == "ALERT":
            cause = p["cause"]
            alerts_by_cause[cause] = alerts_by_cause.get(cause, 0) + 1
            if cause in _DISPATCH_CAUSE_VALUES:
                pending_alerts.setdefault(p["bin_id"], []).append(at)
        elif kind == "ORDER_CREATED":
            totals["orders_created"] += 1
            speed = truck_speeds.get(p["truck_id"])
            if speed:
                travel_ms = p["route_length_m"] / (speed / 3600.0)
                if max_order_travel_ms is None or travel_ms > max_order_travel_ms:
                    max_order_travel_ms = travel_ms
        elif kind == "ORDER_DONE":
            totals["orders_done"] += 1
        elif kind == "LOW_BATTERY":
            totals["low_battery_events"] += 1
        elif kind == "LINK_DEGRADED":
            totals["link_degraded_events"] += 1
        elif kind in ("TRUCK_ARRIVE", "TRUCK_DEPOT"):
            total_truck_distance += p["leg_m"]

    unresolved = sum(len(v) for v in pending_alerts.values())
    mean_latency = sum(latencies) / len(latencies) if latencies else None
    center = MonitoringCenter.replay(events)

    return {
        "scenario_id": scenario_id,
        "seed": header.get("seed"),
        "config_hash": header.get("config_hash"),
        "totals": totals,
        "alerts_by_cause": dict(sorted(alerts_by_cause.items())),
        "per_bin_max_fill": dict(sorted(per_bin_max_fill.items())),
        "mean_alert_to_collection_latency_ms": mean_latency,
        "unresolved_dispatch_alerts": unresolved,
        "max_order_travel_time_ms": max_order_travel_ms,
        "total_truck_distance_m": total_truck_distance,
        "final_state_hash": center.state_hash(),
    }


def write_report(path, report: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def compare_reports(expected: dict, actual: dict) -> list[str]:
    """Field-by-field comparison; returns human-readable mismatches."""
    mismatches = []
    keys = sorted(set(expected) | set(actual))
    for key in keys:
        if expected.get(key) != actual.get(key):
            mismatches.append(f"{key}: report has {expected.get(key)!r}, log yields {actual.get(key)!r}")
    return mismatches

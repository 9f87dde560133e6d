"""Zone control unit and monitoring center.

Ingests bin telemetry with receiver-side dedup, tracks a per-bin registry
with fill history, raises alerts on threshold crossings (with hysteresis),
sensor disagreement, dual faults, low battery and silence, batches open
alerts into routed work orders, and forecasts when a bin will reach the
threshold.

All state lives behind an event-sourced fold: every mutation is an event
dict applied through ``apply``, and replaying the persisted event stream
reconstructs the exact shutdown state, hash-identical.
"""

from __future__ import annotations

import hashlib
import json
from bisect import insort
from dataclasses import dataclass, field
from enum import Enum

from .core import GeoCoordinate, MS_PER_HOUR, haversine_m
from .routing import RoutingProblem, nearest_neighbor, two_opt
from .telemetry import TelemetryMessage, AckMessage, wire_dict


class IngestResult(str, Enum):
    ACCEPTED = "ACCEPTED"
    DUPLICATE = "DUPLICATE"
    STALE_SEQ = "STALE_SEQ"
    UNKNOWN_BIN = "UNKNOWN_BIN"


class AlertCause(str, Enum):
    THRESHOLD = "THRESHOLD"
    DISAGREE = "DISAGREE"
    DUAL_FAULT = "DUAL_FAULT"
    LOW_BATTERY = "LOW_BATTERY"
    STALE = "STALE"


class AlertStatus(str, Enum):
    OPEN = "OPEN"
    DISPATCHED = "DISPATCHED"
    RESOLVED = "RESOLVED"


class OrderStatus(str, Enum):
    CREATED = "CREATED"
    ASSIGNED = "ASSIGNED"
    IN_PROGRESS = "IN_PROGRESS"
    DONE = "DONE"


# Alert causes a truck visit can address; only these trigger dispatch.
DISPATCH_CAUSES = (AlertCause.THRESHOLD, AlertCause.DISAGREE, AlertCause.DUAL_FAULT)

INSUFFICIENT_DATA = "INSUFFICIENT_DATA"
NON_INCREASING = "NON_INCREASING"


@dataclass(frozen=True, slots=True)
class MonitoringPolicy:
    threshold: float = 0.70
    hysteresis: float = 0.05
    batch_size: int = 5
    max_wait_ms: int = 4 * MS_PER_HOUR
    stale_after_ms: int = 4 * MS_PER_HOUR
    low_battery_v: float = 6.0
    battery_rearm_v: float = 6.5
    history_len: int = 96

    def __post_init__(self):
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        if not 0.0 <= self.hysteresis < self.threshold:
            raise ValueError("hysteresis must be in [0, threshold)")
        if self.batch_size < 1 or self.max_wait_ms <= 0 or self.stale_after_ms <= 0:
            raise ValueError("batch_size, max_wait_ms, stale_after_ms must be positive")


@dataclass(frozen=True, slots=True)
class Zone:
    zone_id: str
    name: str
    bin_ids: tuple[str, ...]
    truck_ids: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class TruckInfo:
    truck_id: str
    capacity_l: float
    speed_kmh: float
    depot: GeoCoordinate


@dataclass(slots=True)
class AlertRecord:
    alert_id: str
    bin_id: str
    created_at: int
    fill_at_alert: float | None
    cause: AlertCause
    status: AlertStatus = AlertStatus.OPEN
    order_id: str | None = None
    resolved_at: int | None = None

    def to_dict(self) -> dict:
        return {
            "alert_id": self.alert_id,
            "bin_id": self.bin_id,
            "created_at": self.created_at,
            "fill_at_alert": self.fill_at_alert,
            "cause": self.cause.value,
            "status": self.status.value,
            "order_id": self.order_id,
            "resolved_at": self.resolved_at,
        }


@dataclass(slots=True)
class WorkOrder:
    order_id: str
    truck_id: str
    bin_ids: tuple[str, ...]
    route_length_m: float
    created_at: int
    status: OrderStatus = OrderStatus.CREATED
    linked_alert_ids: tuple[str, ...] = ()
    inspect_bin_ids: tuple[str, ...] = ()
    collected_bin_ids: list[str] = field(default_factory=list)
    idempotency_key: str | None = None

    def to_dict(self) -> dict:
        return {
            "order_id": self.order_id,
            "truck_id": self.truck_id,
            "bin_ids": list(self.bin_ids),
            "route_length_m": self.route_length_m,
            "created_at": self.created_at,
            "status": self.status.value,
            "linked_alert_ids": list(self.linked_alert_ids),
            "inspect_bin_ids": list(self.inspect_bin_ids),
            "collected_bin_ids": list(self.collected_bin_ids),
            "idempotency_key": self.idempotency_key,
        }


@dataclass(slots=True)
class BinRegistryEntry:
    bin_id: str
    zone_id: str
    position: GeoCoordinate
    latest_fill: float | None = None
    latest_vote_kind: str | None = None
    latest_seq: int = -1
    latest_data_seq: int = -1
    last_heard_at: int | None = None
    battery_v: float | None = None
    history: list[tuple[int, float]] = field(default_factory=list)
    seen: dict[int, str] = field(default_factory=dict)
    threshold_armed: bool = True
    battery_armed: bool = True

    def to_dict(self) -> dict:
        return {
            "bin_id": self.bin_id,
            "zone_id": self.zone_id,
            "lat": self.position.lat_deg,
            "lon": self.position.lon_deg,
            "latest_fill": self.latest_fill,
            "latest_vote_kind": self.latest_vote_kind,
            "latest_seq": self.latest_seq,
            "latest_data_seq": self.latest_data_seq,
            "last_heard_at": self.last_heard_at,
            "battery_v": self.battery_v,
            "history": [list(sample) for sample in self.history],
            "seen": {str(k): v for k, v in sorted(self.seen.items())},
            "threshold_armed": self.threshold_armed,
            "battery_armed": self.battery_armed,
        }


@dataclass(frozen=True, slots=True)
class ForecastResult:
    predicted_at_ms: float | None
    reason: str | None = None
    slope_per_ms: float | None = None


def event_line(at: int, kind: str, payload: dict) -> dict:
    return {"type": "event", "at": at, "kind": kind, "payload": payload}


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def payload_hash(obj: dict) -> str:
    return hashlib.sha256(_canonical_json(obj).encode("utf-8")).hexdigest()[:16]


class ReplayError(ValueError):
    """The event stream cannot be folded back into a state."""


class MonitoringCenter:
    """Event-sourced center state plus the decision logic on top of it.

    Mutations happen only in ``apply``; the ``process_*`` entry points
    decide which events to emit, apply them, and hand them to the sink for
    persistence. Folding the sunk events through ``apply`` on a fresh
    instance reproduces the state exactly.
    """

    def __init__(self, sink=None):
        self._sink = sink
        self.started_at: int = 0
        self.policy = MonitoringPolicy()
        self.registry: dict[str, BinRegistryEntry] = {}
        self.zones: dict[str, Zone] = {}
        self.trucks: dict[str, TruckInfo] = {}
        self.alerts: dict[str, AlertRecord] = {}
        self.orders: dict[str, WorkOrder] = {}
        self.counters: dict[str, int] = {
            "accepted": 0, "duplicate": 0, "stale_seq": 0, "unknown_bin": 0,
            "dispatch_deferred": 0,
        }
        self._orders_by_key: dict[str, str] = {}
        self._next_alert_no = 1
        self._next_order_no = 1
        self._last_deferred_count = -1
        # (bin_id, cause) -> alert_id for every OPEN/DISPATCHED alert;
        # derived state kept in sync by apply so lookups stay O(1)
        self._open_index: dict[tuple[str, str], str] = {}

    # ------------------------------------------------------------------
    # construction

    @classmethod
    def bootstrap(
        cls,
        bins: list[dict],
        zones: list[Zone],
        trucks: list[TruckInfo],
        policy: MonitoringPolicy,
        started_at: int,
        sink=None,
    ) -> "MonitoringCenter":
        """Build a live center by emitting and applying its init event.

        ``bins`` entries carry bin_id, zone_id, lat, lon.
        """
        center = cls(sink=sink)
        init = event_line(started_at, "CENTER_INIT", {
            "started_at": started_at,
            "policy": {
                "threshold": policy.threshold,
                "hysteresis": policy.hysteresis,
                "batch_size": policy.batch_size,
                "max_wait_ms": policy.max_wait_ms,
                "stale_after_ms": policy.stale_after_ms,
                "low_battery_v": policy.low_battery_v,
                "battery_rearm_v": policy.battery_rearm_v,
                "history_len": policy.history_len,
            },
            "bins": bins,
            "zones": [
                {"zone_id": z.zone_id, "name": z.name,
                 "bin_ids": list(z.bin_ids), "truck_ids": list(z.truck_ids)}
                for z in zones
            ],
            "trucks": [
                {"truck_id": t.truck_id, "capacity_l": t.capacity_l,
                 "speed_kmh": t.speed_kmh, "lat": t.depot.lat_deg, "lon": t.depot.lon_deg}
                for t in trucks
            ],
        })
        center._emit(init)
        return center

    @classmethod
    def replay(cls, events) -> "MonitoringCenter":
        """Fold a persisted event stream back into a center state."""
        center = cls(sink=None)
        for event in events:
            center.apply(event)
        return center

    def _emit(self, event: dict) -> dict:
        self.apply(event)
        if self._sink is not None:
            self._sink(event)
        return event

    # ------------------------------------------------------------------
    # the fold

    def apply(self, event: dict) -> None:
        if event.get("type") != "event":
            raise ReplayError(f"not an event line: {event!r}")
        kind = event.get("kind")
        handler = getattr(self, f"_apply_{str(kind).lower()}", None)
        if handler is not None:
            handler(event["at"], event.get("payload") or {})
        # kinds without a handler (simulator-side events) do not touch
        # center state; replay still counts them elsewhere.

    def _apply_center_init(self, at: int, p: dict) -> None:
        self.started_at = p["started_at"]
        pol = p["policy"]
        self.policy = MonitoringPolicy(
            threshold=pol["threshold"],
            hysteresis=pol["hysteresis"],
            batch_size=pol["batch_size"],
            max_wait_ms=pol["max_wait_ms"],
            stale_after_ms=pol["stale_after_ms"],
            low_battery_v=pol["low_battery_v"],
            battery_rearm_v=pol["battery_rearm_v"],
            history_len=pol["history_len"],
        )
        for b in p["bins"]:
            self.registry[b["bin_id"]] = BinRegistryEntry(
                bin_id=b["bin_id"],
                zone_id=b["zone_id"],
                position=GeoCoordinate(b["lat"], b["lon"]),
            )
        for z in p["zones"]:
            self.zones[z["zone_id"]] = Zone(
                zone_id=z["zone_id"], name=z["name"],
                bin_ids=tuple(z["bin_ids"]), truck_ids=tuple(z["truck_ids"]),
            )
        for t in p["trucks"]:
            self.trucks[t["truck_id"]] = TruckInfo(
                truck_id=t["truck_id"], capacity_l=t["capacity_l"],
                speed_kmh=t["speed_kmh"], depot=GeoCoordinate(t["lat"], t["lon"]),
            )

    def _apply_deliver(self, at: int, p: dict) -> None:
        result = IngestResult(p["result"])
        msg = p["message"]
        if result is IngestResult.UNKNOWN_BIN:
            self.counters["unknown_bin"] += 1
            return
        if result is IngestResult.DUPLICATE:
            self.counters["duplicate"] += 1
            return
        if result is IngestResult.STALE_SEQ:
            self.counters["stale_seq"] += 1
            return

        self.counters["accepted"] += 1
        entry = self.registry[msg["bin_id"]]
        seq = msg["seq"]
        entry.seen[seq] = payload_hash(msg)
        entry.latest_seq = max(entry.latest_seq, seq)
        entry.last_heard_at = at if entry.last_heard_at is None else max(entry.last_heard_at, at)

        fill = msg["vote_fill"]
        if fill is not None:
            insort(entry.history, (msg["sent_at"], fill))
            if len(entry.history) > self.policy.history_len:
                del entry.history[: len(entry.history) - self.policy.history_len]

        if seq >= entry.latest_data_seq:
            entry.latest_data_seq = seq
            entry.latest_vote_kind = msg["vote_kind"]
            entry.battery_v = msg["battery_v"]
            if fill is not None:
                entry.latest_fill = fill
                if fill < self.policy.threshold - self.policy.hysteresis:
                    entry.threshold_armed = True
            if msg["battery_v"] > self.policy.battery_rearm_v:
                entry.battery_armed = True
                self._auto_resolve(entry.bin_id, (AlertCause.LOW_BATTERY,), at)

        # any accepted message proves the link is alive
        self._auto_resolve(entry.bin_id, (AlertCause.STALE,), at)

    def _apply_alert(self, at: int, p: dict) -> None:
        cause = AlertCause(p["cause"])
        self.alerts[p["alert_id"]] = AlertRecord(
            alert_id=p["alert_id"],
            bin_id=p["bin_id"],
            created_at=at,
            fill_at_alert=p.get("fill"),
            cause=cause,
        )
        self._open_index[(p["bin_id"], cause.value)] = p["alert_id"]
        self._next_alert_no = max(self._next_alert_no, int(p["alert_id"].split("-")[1]) + 1)
        entry = self.registry.get(p["bin_id"])
        if entry is not None:
            if cause is AlertCause.THRESHOLD:
                entry.threshold_armed = False
            elif cause is AlertCause.LOW_BATTERY:
                entry.battery_armed = False

    def _apply_dispatch_deferred(self, at: int, p: dict) -> None:
        self.counters["dispatch_deferred"] += 1
        self._last_deferred_count = p["open_alerts"]

    def _apply_order_created(self, at: int, p: dict) -> None:
        order = WorkOrder(
            order_id=p["order_id"],
            truck_id=p["truck_id"],
            bin_ids=tuple(p["bin_ids"]),
            route_length_m=p["route_length_m"],
            created_at=at,
            status=OrderStatus.CREATED,
            linked_alert_ids=tuple(p["linked_alert_ids"]),
            inspect_bin_ids=tuple(p.get("inspect_bin_ids", ())),
            idempotency_key=p.get("idempotency_key"),
        )
        self.orders[order.order_id] = order
        self._next_order_no = max(self._next_order_no, int(order.order_id.split("-")[1]) + 1)
        if order.idempotency_key:
            self._orders_by_key[order.idempotency_key] = order.order_id

    def _apply_order_assigned(self, at: int, p: dict) -> None:
        order = self.orders[p["order_id"]]
        order.status = OrderStatus.ASSIGNED
        for alert_id in order.linked_alert_ids:
            alert = self.alerts[alert_id]
            if alert.status is AlertStatus.OPEN:
                alert.status = AlertStatus.DISPATCHED
                alert.order_id = order.order_id

    def _apply_order_in_progress(self, at: int, p: dict) -> None:
        self.orders[p["order_id"]].status = OrderStatus.IN_PROGRESS

    def _apply_order_done(self, at: int, p: dict) -> None:
        self.orders[p["order_id"]].status = OrderStatus.DONE

    def _apply_collect(self, at: int, p: dict) -> None:
        bin_id = p["bin_id"]
        self._auto_resolve(bin_id, DISPATCH_CAUSES, at)
        order_id = p.get("order_id")
        if order_id and order_id in self.orders:
            order = self.orders[order_id]
            if bin_id in order.bin_ids and bin_id not in order.collected_bin_ids:
                order.collected_bin_ids.append(bin_id)

    def _auto_resolve(self, bin_id: str, causes: tuple[AlertCause, ...], at: int) -> None:
        for cause in causes:
            alert_id = self._open_index.pop((bin_id, cause.value), None)
            if alert_id is not None:
                alert = self.alerts[alert_id]
                alert.status = AlertStatus.RESOLVED
                alert.resolved_at = at

    # ------------------------------------------------------------------
    # decisions

    def classify_ingest(self, msg: TelemetryMessage) -> IngestResult:
        entry = self.registry.get(msg.bin_id)
        if entry is None:
            return IngestResult.UNKNOWN_BIN
        if msg.seq in entry.seen:
            if entry.seen[msg.seq] == payload_hash(wire_dict(msg)):
                return IngestResult.DUPLICATE
            return IngestResult.STALE_SEQ
        return IngestResult.ACCEPTED

    def process_ingest(
        self, msg: TelemetryMessage, now: int
    ) -> tuple[IngestResult, list[AckMessage], list[dict]]:
        """Ingest one delivered message; returns (result, acks, events)."""
        result = self.classify_ingest(msg)
        events = [self._emit(event_line(now, "DELIVER", {
            "message": wire_dict(msg), "result": result.value,
        }))]
        acks: list[AckMessage] = []
        if result in (IngestResult.ACCEPTED, IngestResult.DUPLICATE):
            acks.append(AckMessage(bin_id=msg.bin_id, seq=msg.seq, received_at=now))
        if result is IngestResult.ACCEPTED:
            events.extend(self._raise_alerts_for(msg.bin_id, now))
            events.extend(self.plan_dispatch(now))
        return result, acks, events

    def _open_alert_exists(self, bin_id: str, cause: AlertCause) -> bool:
        return (bin_id, cause.value) in self._open_index

    def _raise_alerts_for(self, bin_id: str, now: int) -> list[dict]:
        """Evaluate alert rules for one bin against its current entry."""
        entry = self.registry[bin_id]
        pol = self.policy
        raised: list[dict] = []

        def raise_alert(cause: AlertCause, fill: float | None):
            alert_id = f"A-{self._next_alert_no:06d}"
            raised.append(self._emit(event_line(now, "ALERT", {
                "alert_id": alert_id, "bin_id": bin_id,
                "cause": cause.value, "fill": fill,
            })))

        if (
            entry.latest_fill is not None
            and entry.latest_fill >= pol.threshold
            and entry.threshold_armed
            and not self._open_alert_exists(bin_id, AlertCause.THRESHOLD)
        ):
            raise_alert(AlertCause.THRESHOLD, entry.latest_fill)
        if entry.latest_vote_kind == "DISAGREED" and not self._open_alert_exists(bin_id, AlertCause.DISAGREE):
            raise_alert(AlertCause.DISAGREE, entry.latest_fill)
        if entry.latest_vote_kind == "DUAL_FAULT" and not self._open_alert_exists(bin_id, AlertCause.DUAL_FAULT):
            raise_alert(AlertCause.DUAL_FAULT, None)
        if (
            entry.battery_v is not None
            and entry.battery_v <= pol.low_battery_v
            and entry.battery_armed
            and not self._open_alert_exists(bin_id, AlertCause.LOW_BATTERY)
        ):
            raise_alert(AlertCause.LOW_BATTERY, entry.latest_fill)
        return raised

    def evaluate_alerts(self, bin_id: str, now: int) -> list[dict]:
        """Public alias: run the alert rules for one bin now."""
        return self._raise_alerts_for(bin_id, now)

    def _active_order_bins(self) -> set[str]:
        busy: set[str] = set()
        for order in self.orders.values():
            if order.status in (OrderStatus.CREATED, OrderStatus.ASSIGNED, OrderStatus.IN_PROGRESS):
                busy.update(set(order.bin_ids) - set(order.collected_bin_ids))
        return busy

    def _dispatchable_alerts(self) -> list[AlertRecord]:
        busy = self._active_order_bins()
        candidates = (
            self.alerts[alert_id]
            for (bin_id, cause), alert_id in self._open_index.items()
            if cause in (c.value for c in DISPATCH_CAUSES) and bin_id not in busy
        )
        return sorted(
            (a for a in candidates if a.status is AlertStatus.OPEN),
            key=lambda a: (a.created_at, a.alert_id),
        )

    def process_check(self, now: int) -> list[dict]:
        """Periodic housekeeping: stale detection plus the dispatch trigger."""
        events: list[dict] = []
        pol = self.policy
        for entry in sorted(self.registry.values(), key=lambda e: e.bin_id):
            heard = entry.last_heard_at if entry.last_heard_at is not None else self.started_at
            if now - heard > pol.stale_after_ms and not self._open_alert_exists(entry.bin_id, AlertCause.STALE):
                alert_id = f"A-{self._next_alert_no:06d}"
                events.append(self._emit(event_line(now, "ALERT", {
                    "alert_id": alert_id, "bin_id": entry.bin_id,
                    "cause": AlertCause.STALE.value, "fill": entry.latest_fill,
                })))
        events.extend(self.plan_dispatch(now))
        return events

    def plan_dispatch(self, now: int) -> list[dict]:
        """Create routed work orders when the batch or age trigger fires."""
        open_alerts = self._dispatchable_alerts()
        if not open_alerts:
            return []
        oldest_age = now - open_alerts[0].created_at
        if len(open_alerts) < self.policy.batch_size and oldest_age <= self.policy.max_wait_ms:
            return []
        if not self.trucks:
            if len(open_alerts) == self._last_deferred_count:
                return []
            return [self._emit(event_line(now, "DISPATCH_DEFERRED", {
                "open_alerts": len(open_alerts),
            }))]

        # nearest-depot partition of the alerted bins
        by_truck: dict[str, list[str]] = {}
        trucks = sorted(self.trucks.values(), key=lambda t: t.truck_id)
        alert_bins = sorted({a.bin_id for a in open_alerts})
        for bin_id in alert_bins:
            pos = self.registry[bin_id].position
            best = min(trucks, key=lambda t: (haversine_m(t.depot, pos), t.truck_id))
            by_truck.setdefault(best.truck_id, []).append(bin_id)

        events: list[dict] = []
        for truck_id in sorted(by_truck):
            bin_ids = by_truck[truck_id]
            truck = self.trucks[truck_id]
            problem = RoutingProblem.build(
                truck.depot, [(b, self.registry[b].position) for b in bin_ids]
            )
            tour = two_opt(nearest_neighbor(problem), problem)
            linked = [
                a.alert_id for a in open_alerts if a.bin_id in bin_ids
            ]
            inspect = sorted({
                a.bin_id for a in open_alerts
                if a.bin_id in bin_ids and a.cause in (AlertCause.DISAGREE, AlertCause.DUAL_FAULT)
            })
            order_id = f"O-{self._next_order_no:06d}"
            events.append(self._emit(event_line(now, "ORDER_CREATED", {
                "order_id": order_id,
                "truck_id": truck_id,
                "bin_ids": list(tour.stop_ids),
                "route_length_m": tour.length_m,
                "linked_alert_ids": linked,
                "inspect_bin_ids": inspect,
                "idempotency_key": None,
                "requested_by": "dispatch",
            })))
            events.append(self._emit(event_line(now, "ORDER_ASSIGNED", {"order_id": order_id})))
        return events

    def create_order(
        self,
        bin_ids: list[str],
        truck_id: str,
        now: int,
        idempotency_key: str | None = None,
        requested_by: str = "operator",
    ) -> tuple[WorkOrder, list[dict]]:
        """Operator-requested order over explicit bins; idempotent by key."""
        if idempotency_key and idempotency_key in self._orders_by_key:
            return self.orders[self._orders_by_key[idempotency_key]], []
        if truck_id not in self.trucks:
            raise KeyError(f"unknown truck {truck_id!r}")
        unknown = [b for b in bin_ids if b not in self.registry]
        if unknown:
            raise KeyError(f"unknown bins {unknown!r}")
        if not bin_ids:
            raise ValueError("order needs at least one bin")
        truck = self.trucks[truck_id]
        problem = RoutingProblem.build(
            truck.depot, [(b, self.registry[b].position) for b in sorted(set(bin_ids))]
        )
        tour = two_opt(nearest_neighbor(problem), problem)
        linked = sorted(
            a.alert_id for a in self.alerts.values()
            if a.bin_id in bin_ids and a.status is AlertStatus.OPEN and a.cause in DISPATCH_CAUSES
        )
        order_id = f"O-{self._next_order_no:06d}"
        events = [
            self._emit(event_line(now, "ORDER_CREATED", {
                "order_id": order_id,
                "truck_id": truck_id,
                "bin_ids": list(tour.stop_ids),
                "route_length_m": tour.length_m,
                "linked_alert_ids": linked,
                "inspect_bin_ids": [],
                "idempotency_key": idempotency_key,
                "requested_by": requested_by,
            })),
            self._emit(event_line(now, "ORDER_ASSIGNED", {"order_id": order_id})),
        ]
        return self.orders[order_id], events

    def set_order_status(self, order_id: str, status: OrderStatus, now: int) -> list[dict]:
        """Driver/operator progress updates; forward transitions only."""
        order = self.orders.get(order_id)
        if order is None:
            raise KeyError(f"unknown order {order_id!r}")
        ladder = [OrderStatus.CREATED, OrderStatus.ASSIGNED, OrderStatus.IN_PROGRESS, OrderStatus.DONE]
        if ladder.index(status) <= ladder.index(order.status):
            raise ValueError(f"cannot move order {order_id} from {order.status.value} to {status.value}")
        events: list[dict] = []
        if status is OrderStatus.IN_PROGRESS:
            events.append(self._emit(event_line(now, "ORDER_IN_PROGRESS", {"order_id": order_id})))
        elif status is OrderStatus.DONE:
            # a manual DONE confirms collection of anything still pending
            for bin_id in order.bin_ids:
                if bin_id not in order.collected_bin_ids:
                    events.append(self._emit(event_line(now, "COLLECT", {
                        "bin_id": bin_id, "volume_l": None,
                        "truck_id": order.truck_id, "order_id": order_id,
                    })))
            events.append(self._emit(event_line(now, "ORDER_DONE", {"order_id": order_id})))
        else:
            events.append(self._emit(event_line(now, "ORDER_ASSIGNED", {"order_id": order_id})))
        return events

    def process_collect(
        self, bin_id: str, volume_l: float | None, truck_id: str | None,
        order_id: str | None, now: int,
    ) -> list[dict]:
        """Confirm a truck emptied a bin; closes the order when complete."""
        events = [self._emit(event_line(now, "COLLECT", {
            "bin_id": bin_id, "volume_l": volume_l,
            "truck_id": truck_id, "order_id": order_id,
        }))]
        if order_id and order_id in self.orders:
            order = self.orders[order_id]
            if set(order.collected_bin_ids) >= set(order.bin_ids) and order.status is not OrderStatus.DONE:
                events.append(self._emit(event_line(now, "ORDER_DONE", {"order_id": order_id})))
        return events

    # ------------------------------------------------------------------
    # queries

    def forecast_full_at(
        self, bin_id: str, now: int, threshold: float | None = None
    ) -> ForecastResult:
        """Least-squares line through the fill history, solved for threshold."""
        entry = self.registry.get(bin_id)
        if entry is None:
            raise KeyError(f"unknown bin {bin_id!r}")
        if threshold is None:
            threshold = self.policy.threshold
        history = entry.history
        if len(history) < 2:
            return ForecastResult(None, reason=INSUFFICIENT_DATA)
        if history[-1][1] >= threshold:
            return ForecastResult(float(now))
        times = [t for t, _ in history]
        fills = [f for _, f in history]
        n = len(history)
        t_mean = sum(times) / n
        f_mean = sum(fills) / n
        sxx = sum((t - t_mean) ** 2 for t in times)
        sxy = sum((t - t_mean) * (f - f_mean) for t, f in zip(times, fills))
        if sxx == 0:
            return ForecastResult(None, reason=NON_INCREASING)
        slope = sxy / sxx
        if slope <= 0:
            return ForecastResult(None, reason=NON_INCREASING, slope_per_ms=slope)
        intercept = f_mean - slope * t_mean
        t_star = (threshold - intercept) / slope
        return ForecastResult(max(t_star, float(now)), slope_per_ms=slope)

    # ------------------------------------------------------------------
    # state identity

    def canonical_state(self) -> dict:
        return {
            "started_at": self.started_at,
            "registry": [self.registry[k].to_dict() for k in sorted(self.registry)],
            "alerts": [self.alerts[k].to_dict() for k in sorted(self.alerts)],
            "orders": [self.orders[k].to_dict() for k in sorted(self.orders)],
            "counters": dict(sorted(self.counters.items())),
        }

    def state_hash(self) -> str:
        return hashlib.sha256(_canonical_json(self.canonical_state()).encode("utf-8")).hexdigest()

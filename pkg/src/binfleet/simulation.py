"""Deterministic discrete-event simulation of bins, trucks, and the channel.

One seeded RNG drives everything through a single-threaded event loop, so a
given config always produces a byte-identical event log. The monitoring
center runs inside the loop and its events are interleaved into the same
log, which makes the log the single replayable source of truth.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

from .config import BinConfig, ScenarioConfig, TruckConfig, config_hash
from .core import BinGeometry, GeoCoordinate, SensorSpec, haversine_m
from .monitoring import MonitoringCenter, OrderStatus, event_line
from .rng import SeededRng
from .sensing import SensorChannel, measure, vote
from .telemetry import (
    AckMessage, ChannelModel, RetransmitTracker, TelemetryMessage,
    decode, encode, wire_dict,
)

LOG_VERSION = 1


def deposit_process(
    rate_per_day: float,
    lognormal_mu: float,
    lognormal_sigma: float,
    rng: SeededRng,
    duration_ms: int,
    capacity_l: float | None = None,
) -> list[tuple[int, float]]:
    """Poisson waste arrivals with lognormal volumes, truncated at capacity.

    Per event the draws are: one exponential inter-arrival, then one
    gaussian for the volume.
    """
    if rate_per_day < 0:
        raise ValueError("rate must be >= 0")
    events: list[tuple[int, float]] = []
    if rate_per_day == 0:
        return events
    duration_days = duration_ms / 86_400_000.0
    t_days = 0.0
    while True:
        t_days += rng.expovariate(rate_per_day)
        if t_days > duration_days:
            break
        volume = rng.lognormal(lognormal_mu, lognormal_sigma)
        if capacity_l is not None:
            volume = min(volume, capacity_l)
        events.append((round(t_days * 86_400_000), volume))
    return events


def battery_step(
    battery_v: float,
    transmissions: int,
    idle_hours: float,
    cost_per_tx_v: float = 0.002,
    cost_per_hour_v: float = 0.0005,
) -> float:
    """Drain the battery for activity and idle time; floors at zero."""
    if battery_v < 0:
        raise ValueError("battery_v must be >= 0")
    drained = battery_v - transmissions * cost_per_tx_v - idle_hours * cost_per_hour_v
    return max(0.0, drained)


class BatteryMonitor:
    """Raises a low-battery flag once per dip; re-arms above the rearm level."""

    __slots__ = ("low_v", "rearm_v", "armed")

    def __init__(self, low_v: float = 6.0, rearm_v: float = 6.5):
        self.low_v = low_v
        self.rearm_v = rearm_v
        self.armed = True

    def update(self, battery_v: float) -> bool:
        """Returns True exactly when a LOW_BATTERY event should fire."""
        if battery_v > self.rearm_v:
            self.armed = True
            return False
        if battery_v <= self.low_v and self.armed:
            self.armed = False
            return True
        return False


@dataclass(slots=True)
class SimBin:
    cfg: BinConfig
    geometry: BinGeometry
    spec: SensorSpec
    channels: tuple[SensorChannel, SensorChannel]
    tracker: RetransmitTracker
    battery_monitor: BatteryMonitor
    volume_l: float = 0.0
    battery_v: float = 9.0
    next_seq: int = 1
    outstanding: dict[int, bytes] = field(default_factory=dict)
    link_degraded: bool = False
    last_battery_at: int = 0

    def true_distance_cm(self) -> float:
        frac = min(1.0, self.volume_l / self.cfg.capacity_l)
        return self.geometry.depth_cm * (1.0 - frac)


@dataclass(slots=True)
class SimTruck:
    cfg: TruckConfig
    position: GeoCoordinate
    load_l: float = 0.0
    queue: list[str] = field(default_factory=list)
    active_order_id: str | None = None
    visit_list: tuple[str, ...] = ()
    next_stop: int = 0
    pending_return: str | None = None
    distance_m: float = 0.0

    def speed_m_per_ms(self) -> float:
        return self.cfg.speed_kmh / 3600.0

    def travel_ms(self, leg_m: float) -> int:
        return round(leg_m / self.speed_m_per_ms())


class Simulator:
    """Runs one scenario to completion and collects its event log."""

    def __init__(self, config: ScenarioConfig, sink=None):
        self.config = config
        self.rng = SeededRng(config.seed)
        self.t0 = config.start_epoch_ms
        self.t_end = config.start_epoch_ms + config.duration_ms
        self.lines: list[dict] = []
        self._external_sink = sink
        self._heap: list[tuple[int, int, str, tuple]] = []
        self._push_counter = 0

        self.uplink = ChannelModel(config.channel)
        self.downlink = ChannelModel(config.channel)
        self.current_time = self.t0

        self.bins: dict[str, SimBin] = {}
        for b in config.bins:
            geometry = BinGeometry(depth_cm=b.depth_cm, capacity_l=b.capacity_l)
            spec = SensorSpec(min_range_cm=b.min_range_cm, max_range_cm=b.max_range_cm,
                              mount_offset_cm=b.mount_offset_cm)
            initial = geometry.depth_cm * (1.0 - min(1.0, b.initial_volume_l / b.capacity_l))
            self.bins[b.bin_id] = SimBin(
                cfg=b, geometry=geometry, spec=spec,
                channels=(SensorChannel(spec, b.fault, initial),
                          SensorChannel(spec, b.fault, initial)),
                tracker=RetransmitTracker(timeout_ms=config.policies.retransmit_timeout_ms,
                                          max_retries=config.policies.max_retries),
                battery_monitor=BatteryMonitor(low_v=config.policies.low_battery_v,
                                               rearm_v=config.policies.battery_rearm_v),
                volume_l=b.initial_volume_l,
                battery_v=b.initial_battery_v,
                last_battery_at=self.t0,
            )

        self.trucks: dict[str, SimTruck] = {
            t.truck_id: SimTruck(cfg=t, position=t.depot) for t in config.trucks
        }

        # bootstrapped in run() so its init event follows the log header
        self.center: MonitoringCenter = None  # type: ignore[assignment]

    # ------------------------------------------------------------------
    # log plumbing

    def _log(self, line: dict) -> None:
        self.lines.append(line)
        if self._external_sink is not None:
            self._external_sink(line)

    def _event(self, at: int, kind: str, payload: dict) -> None:
        self._log(event_line(at, kind, payload))

    def _schedule(self, at: int, handler: str, *args) -> None:
        self._push_counter += 1
        heapq.heappush(self._heap, (at, self._push_counter, handler, args))

    # ------------------------------------------------------------------

    def prepare(self) -> None:
        """Write the header, boot the center, and seed the initial schedule."""
        cfg = self.config
        self._log({
            "type": "log_header", "version": LOG_VERSION,
            "seed": cfg.seed, "config_hash": config_hash(cfg.raw),
        })
        self._event(self.t0, "START", {"scenario_id": cfg.scenario_id})
        self.center = MonitoringCenter.bootstrap(
            bins=cfg.registry_bins(),
            zones=list(cfg.zones),
            trucks=cfg.truck_infos(),
            policy=cfg.monitoring_policy(),
            started_at=self.t0,
            sink=self._log,
        )

        for bin_id in sorted(self.bins):
            unit = self.bins[bin_id]
            if unit.cfg.arrival_rate_per_day > 0:
                self._schedule_next_deposit(self.t0, unit)
            self._schedule(self.t0 + unit.cfg.reporting_period_ms, "read", bin_id)
        if self.bins:
            self._schedule(self.t0 + cfg.policies.dispatch_check_period_ms, "check")
        self.current_time = self.t0

    def step_until(self, t_limit: int) -> None:
        """Process every queued event with at <= min(t_limit, duration end)."""
        limit = min(t_limit, self.t_end)
        while self._heap and self._heap[0][0] <= limit:
            at, _, handler, args = heapq.heappop(self._heap)
            self.current_time = at
            getattr(self, f"_on_{handler}")(at, *args)
        self.current_time = max(self.current_time, limit)

    def finish(self) -> None:
        self._event(self.t_end, "END", {"scenario_id": self.config.scenario_id})

    def run(self) -> "SimResult":
        self.prepare()
        self.step_until(self.t_end)
        self.finish()
        return SimResult(lines=self.lines, center=self.center, simulator=self)

    # external commands (used by the live service's paced mode)

    def external_create_order(self, bin_ids: list[str], truck_id: str, now: int,
                              idempotency_key: str | None = None):
        order, events = self.center.create_order(
            bin_ids, truck_id, now, idempotency_key=idempotency_key)
        self._handle_center_events(now, events)
        return order

    def external_set_order_status(self, order_id: str, status: OrderStatus, now: int) -> None:
        events = self.center.set_order_status(order_id, status, now)
        self._handle_center_events(now, events)

    def external_ingest(self, msg: TelemetryMessage, now: int):
        result, acks, events = self.center.process_ingest(msg, now)
        self._handle_center_events(now, events)
        return result, acks

    # ------------------------------------------------------------------
    # deposits

    def _schedule_next_deposit(self, now: int, unit: SimBin) -> None:
        gap_days = self.rng.expovariate(unit.cfg.arrival_rate_per_day)
        self._schedule(now + max(1, round(gap_days * 86_400_000)), "deposit", unit.cfg.bin_id)

    def _on_deposit(self, at: int, bin_id: str) -> None:
        unit = self.bins[bin_id]
        volume = min(
            self.rng.lognormal(unit.cfg.volume_lognormal_mu, unit.cfg.volume_lognormal_sigma),
            unit.cfg.capacity_l,
        )
        unit.volume_l += volume
        self._event(at, "DEPOSIT", {
            "bin_id": bin_id, "volume_l": volume, "volume_after_l": min(unit.volume_l, unit.cfg.capacity_l),
        })
        if unit.volume_l > unit.cfg.capacity_l:
            spilled = unit.volume_l - unit.cfg.capacity_l
            unit.volume_l = unit.cfg.capacity_l
            self._event(at, "OVERFLOW", {"bin_id": bin_id, "spilled_l": spilled})
        self._schedule_next_deposit(at, unit)

    # ------------------------------------------------------------------
    # sensing and uplink

    def _drain_battery(self, at: int, unit: SimBin, transmissions: int) -> None:
        idle_hours = max(0, at - unit.last_battery_at) / 3_600_000.0
        unit.last_battery_at = at
        unit.battery_v = battery_step(
            unit.battery_v, transmissions, idle_hours,
            self.config.policies.battery_cost_per_tx_v,
            self.config.policies.battery_cost_per_hour_v,
        )
        if unit.battery_monitor.update(unit.battery_v):
            self._event(at, "LOW_BATTERY", {"bin_id": unit.cfg.bin_id, "battery_v": unit.battery_v})

    def _on_read(self, at: int, bin_id: str) -> None:
        unit = self.bins[bin_id]
        self._drain_battery(at, unit, transmissions=0)
        pair = measure(
            unit.true_distance_cm(), unit.cfg.fault, self.rng,
            measured_at=at, channels=unit.channels,
        )
        outcome = vote(pair, unit.geometry, unit.spec, self.config.policies.agree_tol)
        self._event(at, "SENSOR_READ", {
            "bin_id": bin_id,
            "sensor_a_cm": pair.sensor_a_cm, "sensor_b_cm": pair.sensor_b_cm,
            "vote_kind": outcome.kind.value, "vote_fill": outcome.fill,
        })
        if unit.battery_v > self.config.policies.shutdown_battery_v:
            msg = TelemetryMessage(
                bin_id=bin_id, seq=unit.next_seq, sent_at=at,
                position=unit.cfg.position,
                sensor_a_cm=pair.sensor_a_cm, sensor_b_cm=pair.sensor_b_cm,
                vote_kind=outcome.kind, vote_fill=outcome.fill,
                battery_v=unit.battery_v,
            )
            unit.next_seq += 1
            payload = encode(msg)
            unit.outstanding[msg.seq] = payload
            self._event(at, "SEND", {"bin_id": bin_id, "seq": msg.seq, "message": wire_dict(msg)})
            self._drain_battery(at, unit, transmissions=1)
            self._transmit_uplink(at, unit, msg.seq, payload)
            check_at = unit.tracker.on_send(msg.seq, at)
            self._schedule(check_at, "retry_check", bin_id)
        self._schedule(at + unit.cfg.reporting_period_ms, "read", bin_id)

    def _transmit_uplink(self, at: int, unit: SimBin, seq: int, payload: bytes) -> None:
        deliveries = self.uplink.transmit(unit.cfg.bin_id, at, self.rng)
        if not deliveries:
            self._event(at, "CHANNEL_DROP", {"direction": "up", "bin_id": unit.cfg.bin_id, "seq": seq})
            return
        if len(deliveries) > 1:
            self._event(at, "CHANNEL_DUP", {"direction": "up", "bin_id": unit.cfg.bin_id, "seq": seq})
        for deliver_at in deliveries:
            self._schedule(deliver_at, "deliver", payload)

    def _on_retry_check(self, at: int, bin_id: str) -> None:
        unit = self.bins[bin_id]
        resends, abandoned = unit.tracker.due(at)
        for seq, next_due in resends:
            payload = unit.outstanding.get(seq)
            if payload is None:
                continue
            self._event(at, "RESEND", {"bin_id": bin_id, "seq": seq})
            self._drain_battery(at, unit, transmissions=1)
            self._transmit_uplink(at, unit, seq, payload)
            self._schedule(next_due, "retry_check", bin_id)
        for seq in abandoned:
            unit.outstanding.pop(seq, None)
            if not unit.link_degraded:
                unit.link_degraded = True
                self._event(at, "LINK_DEGRADED", {"bin_id": bin_id, "seq": seq})

    # ------------------------------------------------------------------
    # center side

    def _on_deliver(self, at: int, payload: bytes) -> None:
        msg = decode(payload)
        _result, acks, events = self.center.process_ingest(msg, at)
        self._handle_center_events(at, events)
        for ack in acks:
            self._transmit_ack(at, ack)

    def _transmit_ack(self, at: int, ack: AckMessage) -> None:
        deliveries = self.downlink.transmit(ack.bin_id, at, self.rng)
        if not deliveries:
            self._event(at, "CHANNEL_DROP", {"direction": "down", "bin_id": ack.bin_id, "seq": ack.seq})
            return
        if len(deliveries) > 1:
            self._event(at, "CHANNEL_DUP", {"direction": "down", "bin_id": ack.bin_id, "seq": ack.seq})
        for deliver_at in deliveries:
            self._schedule(deliver_at, "ack", ack.bin_id, ack.seq)

    def _on_ack(self, at: int, bin_id: str, seq: int) -> None:
        unit = self.bins[bin_id]
        self._event(at, "ACK", {"bin_id": bin_id, "seq": seq})
        unit.tracker.on_ack(seq)
        unit.outstanding.pop(seq, None)
        unit.link_degraded = False

    def _on_check(self, at: int) -> None:
        events = self.center.process_check(at)
        self._handle_center_events(at, events)
        self._schedule(at + self.config.policies.dispatch_check_period_ms, "check")

    def _handle_center_events(self, at: int, events: list[dict]) -> None:
        for event in events:
            if event["kind"] == "ORDER_ASSIGNED":
                self._assign_order(at, event["payload"]["order_id"])

    # ------------------------------------------------------------------
    # trucks

    def _assign_order(self, at: int, order_id: str) -> None:
        order = self.center.orders[order_id]
        truck = self.trucks[order.truck_id]
        truck.queue.append(order_id)
        if truck.active_order_id is None:
            self._start_next_order(at, truck)

    def _start_next_order(self, at: int, truck: SimTruck) -> None:
        if not truck.queue:
            return
        order_id = truck.queue.pop(0)
        order = self.center.orders[order_id]
        truck.active_order_id = order_id
        truck.visit_list = tuple(order.bin_ids)
        truck.next_stop = 0
        events = self.center.set_order_status(order_id, OrderStatus.IN_PROGRESS, at)
        self._handle_center_events(at, events)
        self._drive_to_next_stop(at, truck)

    def _drive_to_next_stop(self, at: int, truck: SimTruck) -> None:
        if truck.next_stop >= len(truck.visit_list):
            self._drive_to_depot(at, truck)
            return
        bin_id = truck.visit_list[truck.next_stop]
        leg_m = haversine_m(truck.position, self.bins[bin_id].cfg.position)
        self._schedule(at + truck.travel_ms(leg_m), "truck_arrive", truck.cfg.truck_id, bin_id, leg_m)

    def _drive_to_depot(self, at: int, truck: SimTruck) -> None:
        leg_m = haversine_m(truck.position, truck.cfg.depot)
        self._schedule(at + truck.travel_ms(leg_m), "truck_depot", truck.cfg.truck_id, leg_m)

    def _on_truck_arrive(self, at: int, truck_id: str, bin_id: str, leg_m: float) -> None:
        truck = self.trucks[truck_id]
        unit = self.bins[bin_id]
        truck.distance_m += leg_m
        truck.position = unit.cfg.position
        self._event(at, "TRUCK_ARRIVE", {"truck_id": truck_id, "bin_id": bin_id, "leg_m": leg_m})

        volume = unit.volume_l
        if truck.load_l > 0 and truck.load_l + volume > truck.cfg.capacity_l:
            # over capacity: unload at the depot first, then come back
            truck.pending_return = bin_id
            self._drive_to_depot(at, truck)
            return
        unit.volume_l = 0.0
        truck.load_l += volume
        events = self.center.process_collect(bin_id, volume, truck_id, truck.active_order_id, at)
        self._handle_center_events(at, events)
        truck.next_stop += 1
        self._drive_to_next_stop(at, truck)

    def _on_truck_depot(self, at: int, truck_id: str, leg_m: float) -> None:
        truck = self.trucks[truck_id]
        truck.distance_m += leg_m
        truck.position = truck.cfg.depot
        self._event(at, "TRUCK_DEPOT", {"truck_id": truck_id, "leg_m": leg_m, "unloaded_l": truck.load_l})
        truck.load_l = 0.0
        if truck.pending_return is not None:
            bin_id = truck.pending_return
            truck.pending_return = None
            leg = haversine_m(truck.position, self.bins[bin_id].cfg.position)
            self._schedule(at + truck.travel_ms(leg), "truck_arrive", truck_id, bin_id, leg)
            return
        truck.active_order_id = None
        self._start_next_order(at, truck)


@dataclass
class SimResult:
    lines: list[dict]
    center: MonitoringCenter
    simulator: Simulator

    def events(self, kind: str | None = None) -> list[dict]:
        events = [ln for ln in self.lines if ln.get("type") == "event"]
        if kind is not None:
            events = [e for e in events if e["kind"] == kind]
        return events


def run_scenario(config: ScenarioConfig, sink=None) -> SimResult:
    return Simulator(config, sink=sink).run()

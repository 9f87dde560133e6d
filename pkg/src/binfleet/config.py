"""Declarative scenario configuration.

A scenario is one JSON document describing bins, trucks, zones, the uplink
channel, and all operating policies. Validation collects every violation
so a bad file is reported in one pass.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field

from .core import MS_PER_HOUR, MS_PER_MINUTE, GeoCoordinate
from .monitoring import MonitoringPolicy, TruckInfo, Zone
from .sensing import FaultModel
from .telemetry import ChannelParams

SEED_ENV_VAR = "BINFLEET_SEED"


class ConfigError(ValueError):
    """Invalid scenario config; violations lists every problem found."""

    def __init__(self, violations: list[str]):
        super().__init__("invalid config:\n" + "\n".join(f"  - {v}" for v in violations))
        self.violations = violations


@dataclass(frozen=True)
class BinConfig:
    bin_id: str
    position: GeoCoordinate
    depth_cm: float
    capacity_l: float
    min_range_cm: float
    max_range_cm: float
    mount_offset_cm: float
    fault: FaultModel
    arrival_rate_per_day: float
    volume_lognormal_mu: float
    volume_lognormal_sigma: float
    reporting_period_ms: int
    initial_battery_v: float
    initial_volume_l: float


@dataclass(frozen=True)
class TruckConfig:
    truck_id: str
    capacity_l: float
    speed_kmh: float
    depot: GeoCoordinate


@dataclass(frozen=True)
class Policies:
    alert_threshold: float = 0.70
    hysteresis: float = 0.05
    agree_tol: float = 0.05
    dispatch_batch_size: int = 5
    max_alert_wait_ms: int = 4 * MS_PER_HOUR
    stale_after_ms: int = 4 * MS_PER_HOUR
    dispatch_check_period_ms: int = 5 * MS_PER_MINUTE
    low_battery_v: float = 6.0
    battery_rearm_v: float = 6.5
    shutdown_battery_v: float = 5.0
    battery_cost_per_tx_v: float = 0.002
    battery_cost_per_hour_v: float = 0.0005
    retransmit_timeout_ms: int = 5_000
    max_retries: int = 5
    history_len: int = 96
    public_empty_cutoff: float = 0.30
    public_full_cutoff: float = 0.70


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    seed: int
    start_epoch_ms: int
    duration_ms: int
    bins: tuple[BinConfig, ...]
    trucks: tuple[TruckConfig, ...]
    zones: tuple[Zone, ...]
    channel: ChannelParams
    policies: Policies
    operator_token: str
    raw: dict = field(repr=False, compare=False, default_factory=dict)

    def monitoring_policy(self) -> MonitoringPolicy:
        p = self.policies
        return MonitoringPolicy(
            threshold=p.alert_threshold,
            hysteresis=p.hysteresis,
            batch_size=p.dispatch_batch_size,
            max_wait_ms=p.max_alert_wait_ms,
            stale_after_ms=p.stale_after_ms,
            low_battery_v=p.low_battery_v,
            battery_rearm_v=p.battery_rearm_v,
            history_len=p.history_len,
        )

    def truck_infos(self) -> list[TruckInfo]:
        return [
            TruckInfo(truck_id=t.truck_id, capacity_l=t.capacity_l,
                      speed_kmh=t.speed_kmh, depot=t.depot)
            for t in self.trucks
        ]

    def registry_bins(self) -> list[dict]:
        zone_of = {}
        for zone in self.zones:
            for bin_id in zone.bin_ids:
                zone_of[bin_id] = zone.zone_id
        return [
            {"bin_id": b.bin_id, "zone_id": zone_of[b.bin_id],
             "lat": b.position.lat_deg, "lon": b.position.lon_deg}
            for b in self.bins
        ]


def config_hash(raw: dict) -> str:
    return hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()


def _num(raw: dict, key: str, errors: list[str], ctx: str, default=None,
         minimum=None, maximum=None, exclusive_min=None, integer=False):
    if key not in raw:
        if default is not None:
            return default
        errors.append(f"{ctx}: missing required field {key!r}")
        return None
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errors.append(f"{ctx}: field {key!r} must be a number")
        return None
    if integer and not isinstance(value, int):
        errors.append(f"{ctx}: field {key!r} must be an integer")
        return None
    if minimum is not None and value < minimum:
        errors.append(f"{ctx}: field {key!r} must be >= {minimum}, got {value}")
        return None
    if exclusive_min is not None and value <= exclusive_min:
        errors.append(f"{ctx}: field {key!r} must be > {exclusive_min}, got {value}")
        return None
    if maximum is not None and value > maximum:
        errors.append(f"{ctx}: field {key!r} must be <= {maximum}, got {value}")
        return None
    return value


def _coordinate(raw: dict, lat_key: str, lon_key: str, errors: list[str], ctx: str):
    lat = _num(raw, lat_key, errors, ctx, minimum=-90.0, maximum=90.0)
    lon = _num(raw, lon_key, errors, ctx, minimum=-180.0, maximum=180.0)
    if lat is None or lon is None:
        return None
    return GeoCoordinate(lat, lon)


def parse_config(raw: dict, seed_override: int | None = None) -> ScenarioConfig:
    """Validate and build a ScenarioConfig, reporting every violation."""
    errors: list[str] = []
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])

    scenario_id = raw.get("scenario_id", "scenario")
    if not isinstance(scenario_id, str) or not scenario_id:
        errors.append("scenario_id must be a non-empty string")

    seed = _num(raw, "seed", errors, "top level", minimum=0, integer=True)
    if seed_override is not None:
        seed = seed_override
    start_epoch_ms = _num(raw, "start_epoch_ms", errors, "top level", default=0, minimum=0, integer=True)
    duration_ms = _num(raw, "duration_ms", errors, "top level", exclusive_min=0, integer=True)

    # bins
    bins: list[BinConfig] = []
    seen_bin_ids: set[str] = set()
    raw_bins = raw.get("bins", [])
    if not isinstance(raw_bins, list):
        errors.append("bins must be a list")
        raw_bins = []
    for i, rb in enumerate(raw_bins):
        ctx = f"bins[{i}]"
        if not isinstance(rb, dict):
            errors.append(f"{ctx}: must be an object")
            continue
        bin_id = rb.get("id")
        if not isinstance(bin_id, str) or not bin_id:
            errors.append(f"{ctx}: field 'id' must be a non-empty string")
            bin_id = f"<bins[{i}]>"
        elif bin_id in seen_bin_ids:
            errors.append(f"{ctx}: duplicate bin id {bin_id!r}")
        else:
            seen_bin_ids.add(bin_id)
        pos = _coordinate(rb, "lat", "lon", errors, ctx)
        depth = _num(rb, "depth_cm", errors, ctx, exclusive_min=0)
        capacity = _num(rb, "capacity_l", errors, ctx, exclusive_min=0)
        sensor = rb.get("sensor", {}) if isinstance(rb.get("sensor", {}), dict) else {}
        min_range = _num(sensor, "min_range_cm", errors, f"{ctx}.sensor", default=2.0, exclusive_min=0)
        max_range = _num(sensor, "max_range_cm", errors, f"{ctx}.sensor", default=400.0, exclusive_min=0)
        mount = _num(sensor, "mount_offset_cm", errors, f"{ctx}.sensor", default=0.0, minimum=0)
        if min_range is not None and max_range is not None and min_range >= max_range:
            errors.append(f"{ctx}.sensor: min_range_cm must be < max_range_cm")
        if depth is not None and min_range is not None and depth <= min_range:
            errors.append(f"{ctx}: depth_cm must exceed the sensor min_range_cm")
        fault_raw = rb.get("fault", {}) if isinstance(rb.get("fault", {}), dict) else {}
        stuck = _num(fault_raw, "stuck_prob", errors, f"{ctx}.fault", default=0.0, minimum=0, maximum=1)
        dropout = _num(fault_raw, "dropout_prob", errors, f"{ctx}.fault", default=0.0, minimum=0, maximum=1)
        sigma = _num(fault_raw, "noise_sigma_cm", errors, f"{ctx}.fault", default=0.0, minimum=0)
        rate = _num(rb, "arrival_rate_per_day", errors, ctx, minimum=0)
        vol = rb.get("deposit_volume", {}) if isinstance(rb.get("deposit_volume", {}), dict) else {}
        mu = _num(vol, "lognormal_mu", errors, f"{ctx}.deposit_volume", default=2.0)
        vsigma = _num(vol, "lognormal_sigma", errors, f"{ctx}.deposit_volume", default=0.5, minimum=0)
        period = _num(rb, "reporting_period_ms", errors, ctx, default=30 * MS_PER_MINUTE,
                      exclusive_min=0, integer=True)
        battery = _num(rb, "initial_battery_v", errors, ctx, default=9.0, minimum=0)
        initial_volume = _num(rb, "initial_volume_l", errors, ctx, default=0.0, minimum=0)
        if errors:
            continue
        bins.append(BinConfig(
            bin_id=bin_id, position=pos, depth_cm=depth, capacity_l=capacity,
            min_range_cm=min_range, max_range_cm=max_range, mount_offset_cm=mount,
            fault=FaultModel(stuck_prob=stuck, dropout_prob=dropout, noise_sigma_cm=sigma),
            arrival_rate_per_day=rate, volume_lognormal_mu=mu, volume_lognormal_sigma=vsigma,
            reporting_period_ms=period, initial_battery_v=battery,
            initial_volume_l=initial_volume,
        ))

    # trucks
    trucks: list[TruckConfig] = []
    seen_truck_ids: set[str] = set()
    raw_trucks = raw.get("trucks", [])
    if not isinstance(raw_trucks, list):
        errors.append("trucks must be a list")
        raw_trucks = []
    for i, rt in enumerate(raw_trucks):
        ctx = f"trucks[{i}]"
        if not isinstance(rt, dict):
            errors.append(f"{ctx}: must be an object")
            continue
        truck_id = rt.get("id")
        if not isinstance(truck_id, str) or not truck_id:
            errors.append(f"{ctx}: field 'id' must be a non-empty string")
            truck_id = f"<trucks[{i}]>"
        elif truck_id in seen_truck_ids:
            errors.append(f"{ctx}: duplicate truck id {truck_id!r}")
        else:
            seen_truck_ids.add(truck_id)
        capacity = _num(rt, "capacity_l", errors, ctx, exclusive_min=0)
        speed = _num(rt, "speed_kmh", errors, ctx, exclusive_min=0)
        depot = _coordinate(rt, "depot_lat", "depot_lon", errors, ctx)
        if errors:
            continue
        trucks.append(TruckConfig(truck_id=truck_id, capacity_l=capacity, speed_kmh=speed, depot=depot))

    # zones: optional; default one zone holding everything
    zones: list[Zone] = []
    raw_zones = raw.get("zones")
    if raw_zones is None:
        zones.append(Zone(
            zone_id="zone-all", name="All bins",
            bin_ids=tuple(sorted(seen_bin_ids)), truck_ids=tuple(sorted(seen_truck_ids)),
        ))
    elif not isinstance(raw_zones, list):
        errors.append("zones must be a list")
    else:
        assigned: dict[str, str] = {}
        seen_zone_ids: set[str] = set()
        for i, rz in enumerate(raw_zones):
            ctx = f"zones[{i}]"
            if not isinstance(rz, dict):
                errors.append(f"{ctx}: must be an object")
                continue
            zone_id = rz.get("id")
            if not isinstance(zone_id, str) or not zone_id:
                errors.append(f"{ctx}: field 'id' must be a non-empty string")
                continue
            if zone_id in seen_zone_ids:
                errors.append(f"{ctx}: duplicate zone id {zone_id!r}")
                continue
            seen_zone_ids.add(zone_id)
            name = rz.get("name", zone_id)
            bin_ids = rz.get("bin_ids", [])
            truck_ids = rz.get("truck_ids", [])
            for bin_id in bin_ids:
                if bin_id not in seen_bin_ids:
                    errors.append(f"{ctx}: unknown bin id {bin_id!r}")
                elif bin_id in assigned:
                    errors.append(f"{ctx}: bin {bin_id!r} already in zone {assigned[bin_id]!r}")
                else:
                    assigned[bin_id] = zone_id
            for truck_id in truck_ids:
                if truck_id not in seen_truck_ids:
                    errors.append(f"{ctx}: unknown truck id {truck_id!r}")
            zones.append(Zone(zone_id=zone_id, name=name,
                              bin_ids=tuple(bin_ids), truck_ids=tuple(truck_ids)))
        unassigned = seen_bin_ids - set(assigned)
        if raw_zones and unassigned:
            errors.append(f"bins not assigned to any zone: {sorted(unassigned)}")

    # channel
    raw_channel = raw.get("channel", {})
    if not isinstance(raw_channel, dict):
        errors.append("channel must be an object")
        raw_channel = {}
    ch_defaults = ChannelParams()
    base = _num(raw_channel, "base_latency_ms", errors, "channel",
                default=ch_defaults.base_latency_ms, minimum=0, integer=True)
    jitter = _num(raw_channel, "latency_jitter_ms", errors, "channel",
                  default=ch_defaults.latency_jitter_ms, minimum=0, integer=True)
    loss = _num(raw_channel, "loss_prob", errors, "channel",
                default=ch_defaults.loss_prob, minimum=0, maximum=1)
    dup = _num(raw_channel, "duplicate_prob", errors, "channel",
               default=ch_defaults.duplicate_prob, minimum=0, maximum=1)
    reorder = raw_channel.get("reorder", False)
    if not isinstance(reorder, bool):
        errors.append("channel: field 'reorder' must be a boolean")
        reorder = False

    # policies
    raw_pol = raw.get("policies", {})
    if not isinstance(raw_pol, dict):
        errors.append("policies must be an object")
        raw_pol = {}
    pd = Policies()
    policies_kwargs = {}
    for name, default, kw in (
        ("alert_threshold", pd.alert_threshold, dict(exclusive_min=0, maximum=1)),
        ("hysteresis", pd.hysteresis, dict(minimum=0)),
        ("agree_tol", pd.agree_tol, dict(exclusive_min=0, maximum=1)),
        ("dispatch_batch_size", pd.dispatch_batch_size, dict(minimum=1, integer=True)),
        ("max_alert_wait_ms", pd.max_alert_wait_ms, dict(exclusive_min=0, integer=True)),
        ("stale_after_ms", pd.stale_after_ms, dict(exclusive_min=0, integer=True)),
        ("dispatch_check_period_ms", pd.dispatch_check_period_ms, dict(exclusive_min=0, integer=True)),
        ("low_battery_v", pd.low_battery_v, dict(minimum=0)),
        ("battery_rearm_v", pd.battery_rearm_v, dict(minimum=0)),
        ("shutdown_battery_v", pd.shutdown_battery_v, dict(minimum=0)),
        ("battery_cost_per_tx_v", pd.battery_cost_per_tx_v, dict(minimum=0)),
        ("battery_cost_per_hour_v", pd.battery_cost_per_hour_v, dict(minimum=0)),
        ("retransmit_timeout_ms", pd.retransmit_timeout_ms, dict(exclusive_min=0, integer=True)),
        ("max_retries", pd.max_retries, dict(minimum=0, integer=True)),
        ("history_len", pd.history_len, dict(minimum=2, integer=True)),
        ("public_empty_cutoff", pd.public_empty_cutoff, dict(exclusive_min=0, maximum=1)),
        ("public_full_cutoff", pd.public_full_cutoff, dict(exclusive_min=0, maximum=1)),
    ):
        policies_kwargs[name] = _num(raw_pol, name, errors, "policies", default=default, **kw)
    if not errors:
        if policies_kwargs["hysteresis"] >= policies_kwargs["alert_threshold"]:
            errors.append("policies: hysteresis must be < alert_threshold")
        if policies_kwargs["public_empty_cutoff"] >= policies_kwargs["public_full_cutoff"]:
            errors.append("policies: public_empty_cutoff must be < public_full_cutoff")

    operator_token = raw.get("operator_token", "dev-operator-token")
    if not isinstance(operator_token, str) or not operator_token:
        errors.append("operator_token must be a non-empty string")

    if errors:
        raise ConfigError(errors)

    effective_raw = dict(raw)
    effective_raw["seed"] = seed
    return ScenarioConfig(
        scenario_id=scenario_id,
        seed=seed,
        start_epoch_ms=start_epoch_ms,
        duration_ms=duration_ms,
        bins=tuple(bins),
        trucks=tuple(trucks),
        zones=tuple(zones),
        channel=ChannelParams(base_latency_ms=base, latency_jitter_ms=jitter,
                              loss_prob=loss, duplicate_prob=dup, reorder=reorder),
        policies=Policies(**policies_kwargs),
        operator_token=operator_token,
        raw=effective_raw,
    )


def load_config(path: str, apply_env_seed: bool = True) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"config is not valid JSON: {exc.msg} (line {exc.lineno})"]) from exc
    seed_override = None
    if apply_env_seed and os.environ.get(SEED_ENV_VAR):
        try:
            seed_override = int(os.environ[SEED_ENV_VAR])
        except ValueError:
            raise ConfigError([f"{SEED_ENV_VAR} must be an integer"]) from None
    return parse_config(raw, seed_override=seed_override)

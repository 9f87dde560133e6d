"""Bin-to-center wire protocol and the GSM-like channel model.

The wire format is newline-delimited JSON so logs stay human-auditable.
The channel applies loss, latency with jitter, and duplication; delivery
is at-least-once with sender retransmission and receiver-side dedup.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import GeoCoordinate
from .rng import SeededRng
from .sensing import VoteKind

READING_FIELDS = (
    "type", "bin_id", "seq", "sent_at", "lat", "lon",
    "sensor_a_cm", "sensor_b_cm", "vote_kind", "vote_fill", "battery_v",
)
ACK_FIELDS = ("type", "bin_id", "seq", "received_at")

MALFORMED = "MALFORMED"
MISSING_FIELD = "MISSING_FIELD"
RANGE = "RANGE"


class ParseError(ValueError):
    """A wire line failed to decode; category names the failure class."""

    def __init__(self, category: str, message: str, field_name: str | None = None):
        super().__init__(f"{category}: {message}")
        self.category = category
        self.field = field_name


@dataclass(frozen=True, slots=True)
class TelemetryMessage:
    bin_id: str
    seq: int
    sent_at: int
    position: GeoCoordinate
    sensor_a_cm: float | None
    sensor_b_cm: float | None
    vote_kind: VoteKind
    vote_fill: float | None
    battery_v: float


@dataclass(frozen=True, slots=True)
class AckMessage:
    bin_id: str
    seq: int
    received_at: int


@dataclass(frozen=True, slots=True)
class ChannelParams:
    base_latency_ms: int = 800
    latency_jitter_ms: int = 1200
    loss_prob: float = 0.02
    duplicate_prob: float = 0.01
    reorder: bool = False

    def __post_init__(self):
        if self.base_latency_ms < 0 or self.latency_jitter_ms < 0:
            raise ValueError("latencies must be >= 0")
        for name in ("loss_prob", "duplicate_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


def wire_dict(msg: TelemetryMessage) -> dict:
    """Message fields in wire order, without the line-type discriminator."""
    return {
        "bin_id": msg.bin_id,
        "seq": msg.seq,
        "sent_at": msg.sent_at,
        "lat": msg.position.lat_deg,
        "lon": msg.position.lon_deg,
        "sensor_a_cm": msg.sensor_a_cm,
        "sensor_b_cm": msg.sensor_b_cm,
        "vote_kind": msg.vote_kind.value,
        "vote_fill": msg.vote_fill,
        "battery_v": msg.battery_v,
    }


def message_from_wire_dict(obj: dict) -> TelemetryMessage:
    """Inverse of wire_dict; assumes already-validated values."""
    return TelemetryMessage(
        bin_id=obj["bin_id"],
        seq=obj["seq"],
        sent_at=obj["sent_at"],
        position=GeoCoordinate(obj["lat"], obj["lon"]),
        sensor_a_cm=obj["sensor_a_cm"],
        sensor_b_cm=obj["sensor_b_cm"],
        vote_kind=VoteKind(obj["vote_kind"]),
        vote_fill=obj["vote_fill"],
        battery_v=obj["battery_v"],
    )


def encode(msg: TelemetryMessage) -> bytes:
    """One reading as a compact JSON line; FAULT channels encode as null."""
    obj = {"type": "reading", **wire_dict(msg)}
    return (json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def encode_ack(ack: AckMessage) -> bytes:
    obj = {"type": "ack", "bin_id": ack.bin_id, "seq": ack.seq, "received_at": ack.received_at}
    return (json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n").encode("utf-8")


def _parse_obj(line: bytes | str) -> dict:
    if isinstance(line, bytes):
        try:
            line = line.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(MALFORMED, f"not valid UTF-8: {exc}") from exc
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(MALFORMED, f"not valid JSON: {exc.msg}") from exc
    if not isinstance(obj, dict):
        raise ParseError(MALFORMED, "line is not a JSON object")
    return obj


def _require(obj: dict, name: str):
    if name not in obj:
        raise ParseError(MISSING_FIELD, f"missing field {name!r}", name)
    return obj[name]


def _number(obj: dict, name: str) -> float:
    value = _require(obj, name)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(MALFORMED, f"field {name!r} must be a number", name)
    if not math.isfinite(value):
        raise ParseError(RANGE, f"field {name!r} must be finite", name)
    return float(value)


def _optional_number(obj: dict, name: str) -> float | None:
    value = _require(obj, name)
    if value is None:
        return None
    return _number(obj, name)


def _uint(obj: dict, name: str) -> int:
    value = _require(obj, name)
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(MALFORMED, f"field {name!r} must be an integer", name)
    if value < 0:
        raise ParseError(RANGE, f"field {name!r} must be >= 0", name)
    return value


def _string(obj: dict, name: str) -> str:
    value = _require(obj, name)
    if not isinstance(value, str):
        raise ParseError(MALFORMED, f"field {name!r} must be a string", name)
    return value


def decode(line: bytes | str) -> TelemetryMessage:
    """Parse one reading line, rejecting with a categorized ParseError."""
    obj = _parse_obj(line)
    kind = _string(obj, "type")
    if kind != "reading":
        raise ParseError(RANGE, f"unexpected line type {kind!r}", "type")

    bin_id = _string(obj, "bin_id")
    if not bin_id:
        raise ParseError(RANGE, "bin_id must be non-empty", "bin_id")
    seq = _uint(obj, "seq")
    sent_at = _uint(obj, "sent_at")
    lat = _number(obj, "lat")
    lon = _number(obj, "lon")
    if not -90.0 <= lat <= 90.0:
        raise ParseError(RANGE, f"lat {lat} outside [-90, 90]", "lat")
    if not -180.0 <= lon <= 180.0:
        raise ParseError(RANGE, f"lon {lon} outside [-180, 180]", "lon")
    sensor_a = _optional_number(obj, "sensor_a_cm")
    sensor_b = _optional_number(obj, "sensor_b_cm")
    for name, val in (("sensor_a_cm", sensor_a), ("sensor_b_cm", sensor_b)):
        if val is not None and val < 0:
            raise ParseError(RANGE, f"{name} must be >= 0", name)
    vote_kind_s = _string(obj, "vote_kind")
    try:
        vote_kind = VoteKind(vote_kind_s)
    except ValueError:
        raise ParseError(RANGE, f"unknown vote_kind {vote_kind_s!r}", "vote_kind") from None
    vote_fill = _optional_number(obj, "vote_fill")
    if vote_fill is not None and not 0.0 <= vote_fill <= 1.0:
        raise ParseError(RANGE, f"vote_fill {vote_fill} outside [0, 1]", "vote_fill")
    battery_v = _number(obj, "battery_v")
    if battery_v < 0:
        raise ParseError(RANGE, "battery_v must be >= 0", "battery_v")

    return TelemetryMessage(
        bin_id=bin_id,
        seq=seq,
        sent_at=sent_at,
        position=GeoCoordinate(lat, lon),
        sensor_a_cm=sensor_a,
        sensor_b_cm=sensor_b,
        vote_kind=vote_kind,
        vote_fill=vote_fill,
        battery_v=battery_v,
    )


def decode_ack(line: bytes | str) -> AckMessage:
    obj = _parse_obj(line)
    kind = _string(obj, "type")
    if kind != "ack":
        raise ParseError(RANGE, f"unexpected line type {kind!r}", "type")
    return AckMessage(
        bin_id=_string(obj, "bin_id"),
        seq=_uint(obj, "seq"),
        received_at=_uint(obj, "received_at"),
    )


class ChannelModel:
    """Lossy, laggy, duplicating one-way channel.

    Per transmission the draws are: loss uniform; then (if kept) jitter
    uniform, duplicate uniform, and a second jitter uniform only when the
    copy fires. With reorder disabled, per-key delivery times are clamped
    to be monotone so send order is preserved.
    """

    def __init__(self, params: ChannelParams):
        self.params = params
        self._last_delivery_ms: dict[str, int] = {}

    def transmit(self, key: str, now_ms: int, rng: SeededRng) -> list[int]:
        """Return delivery times for one transmission (possibly 0 or 2)."""
        p = self.params
        if rng.chance(p.loss_prob):
            return []
        deliveries = [now_ms + p.base_latency_ms + round(rng.random() * p.latency_jitter_ms)]
        if rng.chance(p.duplicate_prob):
            deliveries.append(now_ms + p.base_latency_ms + round(rng.random() * p.latency_jitter_ms))
        if not p.reorder:
            floor = self._last_delivery_ms.get(key, 0)
            clamped = []
            for at in sorted(deliveries):
                at = max(at, floor)
                clamped.append(at)
                floor = at
            deliveries = clamped
            self._last_delivery_ms[key] = floor
        return deliveries


def channel_transmit(
    msg: TelemetryMessage, params: ChannelParams, rng: SeededRng, now_ms: int
) -> list[tuple[int, TelemetryMessage]]:
    """One-shot transmit of a message over a fresh stateless channel view."""
    channel = ChannelModel(params)
    return [(at, msg) for at in channel.transmit(msg.bin_id, now_ms, rng)]


@dataclass(slots=True)
class _Pending:
    sent_at: int
    retries_used: int
    next_due: int


@dataclass(slots=True)
class RetransmitTracker:
    """Per-sender at-least-once bookkeeping.

    Every unacked seq is re-sent at timeout intervals until max_retries is
    exhausted, at which point the seq is abandoned and reported so the
    sender can flag its link as degraded while it keeps queueing new
    messages.
    """

    timeout_ms: int = 5_000
    max_retries: int = 5
    _pending: dict[int, _Pending] = field(default_factory=dict)

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValueError("timeout_ms must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")

    def on_send(self, seq: int, now_ms: int) -> int:
        """Register a first transmission; returns when to check again."""
        due = now_ms + self.timeout_ms
        self._pending[seq] = _Pending(sent_at=now_ms, retries_used=0, next_due=due)
        return due

    def on_ack(self, seq: int) -> bool:
        return self._pending.pop(seq, None) is not None

    def pending_seqs(self) -> list[int]:
        return sorted(self._pending)

    def due(self, now_ms: int) -> tuple[list[tuple[int, int]], list[int]]:
        """Resolve timers at now: (resends as (seq, next_due), abandoned seqs)."""
        resend: list[tuple[int, int]] = []
        abandoned: list[int] = []
        for seq in sorted(self._pending):
            entry = self._pending[seq]
            if entry.next_due > now_ms:
                continue
            if entry.retries_used >= self.max_retries:
                del self._pending[seq]
                abandoned.append(seq)
                continue
            entry.retries_used += 1
            entry.next_due = now_ms + self.timeout_ms
            resend.append((seq, entry.next_due))
        return resend, abandoned

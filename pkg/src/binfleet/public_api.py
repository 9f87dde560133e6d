"""Citizen-facing bin status queries.

Read-only views over the monitoring registry: which bins are full, which
are empty, where they are, and the nearest bins that can still take waste.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import GeoCoordinate, haversine_m
from .monitoring import MonitoringCenter

EMPTY = "EMPTY"
PARTIAL = "PARTIAL"
FULL = "FULL"
UNKNOWN = "UNKNOWN"

STATES = (EMPTY, PARTIAL, FULL, UNKNOWN)

DEFAULT_EMPTY_CUTOFF = 0.30
DEFAULT_FULL_CUTOFF = 0.70


class ZoneNotFound(KeyError):
    pass


@dataclass(frozen=True, slots=True)
class BinStatusView:
    bin_id: str
    position: GeoCoordinate
    fill: float | None
    state: str
    last_heard_at: int | None

    def to_dict(self) -> dict:
        return {
            "bin_id": self.bin_id,
            "lat": self.position.lat_deg,
            "lon": self.position.lon_deg,
            "fill": self.fill,
            "state": self.state,
            "last_heard_at": self.last_heard_at,
        }


def classify(
    fill: float | None,
    heard_at: int | None,
    now: int,
    stale_after_ms: int,
    empty_cutoff: float = DEFAULT_EMPTY_CUTOFF,
    full_cutoff: float = DEFAULT_FULL_CUTOFF,
) -> str:
    if fill is None or heard_at is None or now - heard_at > stale_after_ms:
        return UNKNOWN
    if fill < empty_cutoff:
        return EMPTY
    if fill >= full_cutoff:
        return FULL
    return PARTIAL


def list_bins(
    center: MonitoringCenter,
    now: int,
    state: str | None = None,
    zone: str | None = None,
    empty_cutoff: float = DEFAULT_EMPTY_CUTOFF,
    full_cutoff: float = DEFAULT_FULL_CUTOFF,
) -> list[BinStatusView]:
    """Snapshot of bin statuses, sorted by bin id; filters compose."""
    if state is not None and state not in STATES:
        raise ValueError(f"unknown state filter {state!r}")
    if zone is not None and zone not in center.zones:
        raise ZoneNotFound(zone)
    views = []
    for bin_id in sorted(center.registry):
        entry = center.registry[bin_id]
        if zone is not None and entry.zone_id != zone:
            continue
        view = BinStatusView(
            bin_id=bin_id,
            position=entry.position,
            fill=entry.latest_fill,
            state=classify(entry.latest_fill, entry.last_heard_at, now,
                           center.policy.stale_after_ms, empty_cutoff, full_cutoff),
            last_heard_at=entry.last_heard_at,
        )
        if state is not None and view.state != state:
            continue
        views.append(view)
    return views


def nearest_available(
    center: MonitoringCenter,
    origin: GeoCoordinate,
    k: int,
    now: int,
    empty_cutoff: float = DEFAULT_EMPTY_CUTOFF,
    full_cutoff: float = DEFAULT_FULL_CUTOFF,
) -> list[BinStatusView]:
    """Up to k non-full, non-unknown bins by ascending distance; id ties."""
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates = [
        v for v in list_bins(center, now, empty_cutoff=empty_cutoff, full_cutoff=full_cutoff)
        if v.state in (EMPTY, PARTIAL)
    ]
    candidates.sort(key=lambda v: (haversine_m(origin, v.position), v.bin_id))
    return candidates[:k]

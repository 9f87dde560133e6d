"""Shared domain types, units, and geodesic math.

Coordinates are WGS84 decimal degrees, distances are meters on a spherical
Earth, times are UTC epoch milliseconds, fill levels are fractions in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

MS_PER_SECOND = 1_000
MS_PER_MINUTE = 60_000
MS_PER_HOUR = 3_600_000
MS_PER_DAY = 86_400_000


class DomainError(ValueError):
    """A value violates a domain invariant."""


@dataclass(frozen=True, slots=True)
class GeoCoordinate:
    lat_deg: float
    lon_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.lat_deg) and math.isfinite(self.lon_deg)):
            raise DomainError("coordinates must be finite")
        if not -90.0 <= self.lat_deg <= 90.0:
            raise DomainError(f"latitude {self.lat_deg} outside [-90, 90]")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise DomainError(f"longitude {self.lon_deg} outside [-180, 180]")


@dataclass(frozen=True, slots=True)
class SensorSpec:
    """Ultrasonic ranging envelope: readings only valid inside [min, max] cm."""

    min_range_cm: float = 2.0
    max_range_cm: float = 400.0
    mount_offset_cm: float = 0.0

    def __post_init__(self):
        if not 0 < self.min_range_cm < self.max_range_cm:
            raise DomainError("sensor range requires 0 < min_range_cm < max_range_cm")
        if self.mount_offset_cm < 0:
            raise DomainError("mount_offset_cm must be >= 0")


@dataclass(frozen=True, slots=True)
class BinGeometry:
    """Interior depth from sensor face to bin floor, and nominal capacity."""

    depth_cm: float
    capacity_l: float

    def __post_init__(self):
        if self.depth_cm <= 0:
            raise DomainError("depth_cm must be positive")
        if self.capacity_l <= 0:
            raise DomainError("capacity_l must be positive")


def clamp_fill(raw: float) -> float:
    """Clamp a raw ratio into the [0, 1] fill-fraction domain."""
    if not math.isfinite(raw):
        raise DomainError(f"fill fraction must be finite, got {raw!r}")
    return min(1.0, max(0.0, raw))


def haversine_m(a: GeoCoordinate, b: GeoCoordinate) -> float:
    """Great-circle distance in meters between two WGS84 points."""
    lat1 = math.radians(a.lat_deg)
    lat2 = math.radians(b.lat_deg)
    dlat = math.radians(b.lat_deg - a.lat_deg)
    dlon = math.radians(b.lon_deg - a.lon_deg)
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return EARTH_RADIUS_M * 2.0 * math.asin(min(1.0, math.sqrt(h)))

"""Dual ultrasonic level sensing under the bin lid.

Two identical sensors measure the distance to the waste surface. Each
reading passes through a fault model (dropout, stuck value, Gaussian
noise); the pair is then converted to fill fractions and voted on. Both
sensors agreeing averages them; disagreement escalates to the maximum so a
possibly-full bin is treated as full; a lone healthy sensor carries on
alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import BinGeometry, DomainError, SensorSpec, clamp_fill
from .rng import SeededRng

# A faulted channel reading is represented as None throughout.
FAULT = None


class VoteKind(str, Enum):
    AGREED = "AGREED"
    DISAGREED = "DISAGREED"
    SINGLE = "SINGLE"
    DUAL_FAULT = "DUAL_FAULT"


@dataclass(frozen=True, slots=True)
class SensorReadingPair:
    sensor_a_cm: float | None
    sensor_b_cm: float | None
    measured_at: int


@dataclass(frozen=True, slots=True)
class VoteOutcome:
    kind: VoteKind
    fill: float | None
    detail: tuple[float | None, float | None]


@dataclass(frozen=True, slots=True)
class FaultModel:
    stuck_prob: float = 0.0
    dropout_prob: float = 0.0
    noise_sigma_cm: float = 0.0

    def __post_init__(self):
        for name in ("stuck_prob", "dropout_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise DomainError(f"{name} must be in [0, 1], got {p}")
        if self.noise_sigma_cm < 0:
            raise DomainError("noise_sigma_cm must be >= 0")


def distance_to_fill(distance_cm: float, geometry: BinGeometry, spec: SensorSpec) -> float:
    """Convert a measured distance to a fill fraction.

    Linear between the bin floor (empty) and the sensor's minimum range
    (full): fill = (depth - d) / (depth - min_range).
    """
    if geometry.depth_cm <= spec.min_range_cm:
        raise DomainError("bin depth must exceed the sensor minimum range")
    if not spec.min_range_cm <= distance_cm <= spec.max_range_cm:
        raise DomainError(
            f"distance {distance_cm} cm outside sensor range "
            f"[{spec.min_range_cm}, {spec.max_range_cm}]"
        )
    return clamp_fill((geometry.depth_cm - distance_cm) / (geometry.depth_cm - spec.min_range_cm))


class SensorChannel:
    """One physical sensor with stuck-value memory.

    Per reading the channel consumes three draws in a fixed order (dropout
    uniform, stuck uniform, noise gaussian) so seeded runs can be replayed
    draw-for-draw even when a fault short-circuits the result.
    """

    __slots__ = ("spec", "fault", "last_value_cm")

    def __init__(self, spec: SensorSpec, fault: FaultModel, initial_distance_cm: float):
        self.spec = spec
        self.fault = fault
        self.last_value_cm = initial_distance_cm

    def read(self, true_distance_cm: float, rng: SeededRng) -> float | None:
        dropped = rng.chance(self.fault.dropout_prob)
        stuck = rng.chance(self.fault.stuck_prob)
        noise = rng.gauss(0.0, 1.0)
        if dropped:
            return FAULT
        if stuck:
            value = self.last_value_cm
        else:
            value = true_distance_cm + self.fault.noise_sigma_cm * noise
        if not self.spec.min_range_cm <= value <= self.spec.max_range_cm:
            return FAULT
        self.last_value_cm = value
        return value


def measure(
    true_distance_cm: float,
    fault: FaultModel,
    rng: SeededRng,
    spec: SensorSpec | None = None,
    measured_at: int = 0,
    channels: tuple[SensorChannel, SensorChannel] | None = None,
) -> SensorReadingPair:
    """Read both sensors once against the same true distance.

    Stateless callers get fresh channels whose stuck memory starts at the
    true distance; the simulator passes persistent channels instead.
    """
    if true_distance_cm < 0:
        raise DomainError("true distance must be >= 0")
    if channels is None:
        spec = spec or SensorSpec()
        channels = (
            SensorChannel(spec, fault, true_distance_cm),
            SensorChannel(spec, fault, true_distance_cm),
        )
    a = channels[0].read(true_distance_cm, rng)
    b = channels[1].read(true_distance_cm, rng)
    return SensorReadingPair(sensor_a_cm=a, sensor_b_cm=b, measured_at=measured_at)


def vote(
    pair: SensorReadingPair,
    geometry: BinGeometry,
    spec: SensorSpec,
    agree_tol: float = 0.05,
) -> VoteOutcome:
    """Combine the two channel readings into one fill estimate."""
    if not 0.0 < agree_tol < 1.0:
        raise DomainError("agree_tol must be in (0, 1)")
    fill_a = None if pair.sensor_a_cm is FAULT else distance_to_fill(pair.sensor_a_cm, geometry, spec)
    fill_b = None if pair.sensor_b_cm is FAULT else distance_to_fill(pair.sensor_b_cm, geometry, spec)
    detail = (fill_a, fill_b)

    if fill_a is None and fill_b is None:
        return VoteOutcome(VoteKind.DUAL_FAULT, None, detail)
    if fill_a is None:
        return VoteOutcome(VoteKind.SINGLE, fill_b, detail)
    if fill_b is None:
        return VoteOutcome(VoteKind.SINGLE, fill_a, detail)
    if abs(fill_a - fill_b) <= agree_tol:
        return VoteOutcome(VoteKind.AGREED, (fill_a + fill_b) / 2.0, detail)
    return VoteOutcome(VoteKind.DISAGREED, max(fill_a, fill_b), detail)

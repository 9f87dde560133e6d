"""Collection-route planning over alerted bins.

Single-truck tours: greedy nearest-neighbor construction, first-improvement
2-opt refinement, and an exhaustive permutation search small enough to act
as a verification oracle. Distances default to great-circle meters but any
symmetric metric can be injected.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import Callable, Sequence

from .core import GeoCoordinate, haversine_m

EMPTY_PROBLEM = "EMPTY_PROBLEM"
TOO_LARGE = "TOO_LARGE"

BRUTE_FORCE_MAX_STOPS = 10

Metric = Callable[[GeoCoordinate, GeoCoordinate], float]


class RoutingError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code


@dataclass(frozen=True)
class RoutingProblem:
    depot: GeoCoordinate
    stops: tuple[tuple[str, GeoCoordinate], ...]
    metric: Metric = haversine_m

    def __post_init__(self):
        ids = [stop_id for stop_id, _ in self.stops]
        if len(set(ids)) != len(ids):
            raise RoutingError(EMPTY_PROBLEM, "stop ids must be unique")

    @staticmethod
    def build(
        depot: GeoCoordinate,
        stops: Sequence[tuple[str, GeoCoordinate]],
        metric: Metric = haversine_m,
    ) -> "RoutingProblem":
        return RoutingProblem(depot=depot, stops=tuple(stops), metric=metric)

    def position(self, stop_id: str) -> GeoCoordinate:
        for sid, pos in self.stops:
            if sid == stop_id:
                return pos
        raise KeyError(stop_id)


@dataclass(frozen=True)
class Tour:
    """Ordered stop ids with the depot implicit at both ends."""

    stop_ids: tuple[str, ...]
    length_m: float


def tour_length(problem: RoutingProblem, order: Sequence[str]) -> float:
    pos = {sid: p for sid, p in problem.stops}
    total = 0.0
    here = problem.depot
    for sid in order:
        total += problem.metric(here, pos[sid])
        here = pos[sid]
    total += problem.metric(here, problem.depot)
    return total


def nearest_neighbor(problem: RoutingProblem) -> Tour:
    """Greedy construction from the depot; ties break on lexicographic id."""
    if not problem.stops:
        raise RoutingError(EMPTY_PROBLEM, "no stops to route")
    pos = {sid: p for sid, p in problem.stops}
    unvisited = sorted(pos)
    here = problem.depot
    order: list[str] = []
    while unvisited:
        best = min(unvisited, key=lambda sid: (problem.metric(here, pos[sid]), sid))
        order.append(best)
        unvisited.remove(best)
        here = pos[best]
    return Tour(stop_ids=tuple(order), length_m=tour_length(problem, order))


def two_opt(tour: Tour, problem: RoutingProblem, max_passes: int = 50) -> Tour:
    """First-improvement 2-opt until a clean pass or the pass cap.

    Reverses stop segments; the depot endpoints stay fixed. Never returns a
    longer tour than its input.
    """
    pos = {sid: p for sid, p in problem.stops}
    if set(tour.stop_ids) != set(pos) or len(tour.stop_ids) != len(pos):
        raise RoutingError(EMPTY_PROBLEM, "tour does not match problem stops")
    order = list(tour.stop_ids)
    n = len(order)
    metric = problem.metric

    def at(i: int) -> GeoCoordinate:
        # index -1 and n are the depot legs
        if i < 0 or i >= n:
            return problem.depot
        return pos[order[i]]

    for _ in range(max_passes):
        improved = False
        for i in range(n - 1):
            for j in range(i + 1, n):
                # replace edges (i-1, i) and (j, j+1) with (i-1, j) and (i, j+1)
                before = metric(at(i - 1), at(i)) + metric(at(j), at(j + 1))
                after = metric(at(i - 1), at(j)) + metric(at(i), at(j + 1))
                if before - after > 1e-9:
                    order[i : j + 1] = reversed(order[i : j + 1])
                    improved = True
        if not improved:
            break
    return Tour(stop_ids=tuple(order), length_m=tour_length(problem, order))


def brute_force_optimum(problem: RoutingProblem) -> Tour:
    """Exhaustive search; the globally shortest tour, lexicographic on ties.

    Orientation duplicates (a tour and its reverse) are skipped by requiring
    first < last stop id, which also makes the lexicographically smaller of
    the two representatives the one examined.
    """
    if not problem.stops:
        raise RoutingError(EMPTY_PROBLEM, "no stops to route")
    if len(problem.stops) > BRUTE_FORCE_MAX_STOPS:
        raise RoutingError(
            TOO_LARGE,
            f"{len(problem.stops)} stops exceeds brute-force cap of {BRUTE_FORCE_MAX_STOPS}",
        )
    ids = sorted(sid for sid, _ in problem.stops)
    best_order: tuple[str, ...] | None = None
    best_len = float("inf")
    if len(ids) == 1:
        best_order = tuple(ids)
        best_len = tour_length(problem, ids)
    else:
        for perm in permutations(ids):
            if perm[0] > perm[-1]:
                continue
            length = tour_length(problem, perm)
            if length < best_len - 1e-12 or (
                abs(length - best_len) <= 1e-12 and (best_order is None or perm < best_order)
            ):
                best_len = length
                best_order = perm
    assert best_order is not None
    return Tour(stop_ids=best_order, length_m=tour_length(problem, best_order))

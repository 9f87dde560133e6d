import math
import time

import pytest

from binfleet.core import GeoCoordinate, haversine_m
from binfleet.rng import SeededRng
from binfleet.routing import (
    EMPTY_PROBLEM, TOO_LARGE, RoutingError, RoutingProblem, Tour,
    brute_force_optimum, nearest_neighbor, tour_length, two_opt,
)


def euclid_km(a: GeoCoordinate, b: GeoCoordinate) -> float:
    # planar metric for analytic fixtures: treat (lat, lon) as km coordinates
    return math.hypot(a.lat_deg - b.lat_deg, a.lon_deg - b.lon_deg) * 1000.0


def planar(x_km: float, y_km: float) -> GeoCoordinate:
    return GeoCoordinate(x_km, y_km)


def random_problem(seed: int, n: int) -> RoutingProblem:
    rng = SeededRng(seed)
    stops = [
        (f"s{i:02d}", GeoCoordinate(-26.2 + rng.uniform(0, 0.1), 28.0 + rng.uniform(0, 0.1)))
        for i in range(n)
    ]
    return RoutingProblem.build(GeoCoordinate(-26.25, 27.95), stops)


class TestNearestNeighbor:
    def test_single_stop_out_and_back(self):
        depot = GeoCoordinate(-26.2, 28.0)
        stop = GeoCoordinate(-26.25, 28.05)
        problem = RoutingProblem.build(depot, [("only", stop)])
        tour = nearest_neighbor(problem)
        assert tour.stop_ids == ("only",)
        assert tour.length_m == pytest.approx(2 * haversine_m(depot, stop))

    def test_collinear_stops_visited_in_order(self):
        problem = RoutingProblem.build(
            planar(0, 0),
            [("a", planar(1, 0)), ("b", planar(2, 0)), ("c", planar(3, 0))],
            metric=euclid_km,
        )
        tour = nearest_neighbor(problem)
        assert tour.stop_ids == ("a", "b", "c")
        assert tour.length_m == pytest.approx(6000.0)

    def test_never_beats_brute_force(self):
        problem = random_problem(9, 8)
        assert nearest_neighbor(problem).length_m >= brute_force_optimum(problem).length_m - 1e-9

    def test_empty_problem_rejected(self):
        problem = RoutingProblem.build(planar(0, 0), [])
        with pytest.raises(RoutingError) as err:
            nearest_neighbor(problem)
        assert err.value.code == EMPTY_PROBLEM


class TestTwoOpt:
    def test_optimal_triangle_unchanged(self):
        problem = RoutingProblem.build(
            planar(0, 0), [("a", planar(1, 0)), ("b", planar(1, 1))], metric=euclid_km,
        )
        tour = nearest_neighbor(problem)
        assert two_opt(tour, problem).stop_ids == tour.stop_ids

    def test_uncrosses_square(self):
        # unit-km square visited in crossing order; 2-opt must recover the
        # 4 km perimeter
        corners = {
            "a": planar(0, 0), "b": planar(1, 0), "c": planar(1, 1), "d": planar(0, 1),
        }
        problem = RoutingProblem.build(planar(0, 0), list(corners.items()), metric=euclid_km)
        crossed = Tour(stop_ids=("a", "c", "b", "d"),
                       length_m=tour_length(problem, ("a", "c", "b", "d")))
        assert crossed.length_m > 4000.0
        fixed = two_opt(crossed, problem)
        assert fixed.length_m == pytest.approx(4000.0)

    def test_never_increases_length_and_keeps_stops(self):
        for seed in range(20):
            problem = random_problem(seed, 9)
            nn = nearest_neighbor(problem)
            improved = two_opt(nn, problem)
            assert improved.length_m <= nn.length_m + 1e-9
            assert sorted(improved.stop_ids) == sorted(nn.stop_ids)

    def test_deterministic(self):
        problem = random_problem(123, 8)
        first = two_opt(nearest_neighbor(problem), problem)
        second = two_opt(nearest_neighbor(problem), problem)
        assert first == second


class TestBruteForce:
    def test_two_stops_lexicographic_tie_break(self):
        problem = RoutingProblem.build(
            planar(0, 0), [("b", planar(1, 0)), ("a", planar(0, 1))], metric=euclid_km,
        )
        tour = brute_force_optimum(problem)
        assert tour.stop_ids == ("a", "b")

    def test_unit_square_perimeter(self):
        corners = [("a", planar(0, 0)), ("b", planar(1, 0)), ("c", planar(1, 1)), ("d", planar(0, 1))]
        problem = RoutingProblem.build(planar(0, 0), corners, metric=euclid_km)
        assert brute_force_optimum(problem).length_m == pytest.approx(4000.0)

    def test_too_large_rejected(self):
        problem = random_problem(1, 11)
        with pytest.raises(RoutingError) as err:
            brute_force_optimum(problem)
        assert err.value.code == TOO_LARGE

    def test_single_stop(self):
        problem = RoutingProblem.build(planar(0, 0), [("only", planar(2, 0))], metric=euclid_km)
        assert brute_force_optimum(problem).length_m == pytest.approx(4000.0)


class TestAcceptanceChain:
    def test_hundred_seeded_instances(self):
        """brute <= two_opt(NN) <= NN on all; two_opt within 5% on >= 95."""
        within_5pct = 0
        for seed in range(100):
            problem = random_problem(1000 + seed, 8)
            nn = nearest_neighbor(problem)
            improved = two_opt(nn, problem)
            t0 = time.perf_counter()
            best = brute_force_optimum(problem)
            assert time.perf_counter() - t0 < 1.0
            assert best.length_m <= improved.length_m + 1e-9
            assert improved.length_m <= nn.length_m + 1e-9
            if improved.length_m <= best.length_m * 1.05:
                within_5pct += 1
        assert within_5pct >= 95

"""Built-in scenario builders.

The reference scenario is the fixture every end-to-end check runs against:
50 bins on a Johannesburg-area grid, two trucks, seven simulated days.
Coordinates and rates are fixed values derived from the bin index so the
file is reproducible without touching the simulation RNG.
"""

from __future__ import annotations

CBD_LAT = -26.2041
CBD_LON = 28.0473


def reference_scenario() -> dict:
    bins = []
    for i in range(50):
        row, col = divmod(i, 10)
        # 10 x 5 grid, roughly 1.1 km east-west and 1.7 km north-south pitch
        lat = round(CBD_LAT - 0.015 * row + 0.002 * (col % 3), 6)
        lon = round(CBD_LON + 0.011 * col - 0.003 * (row % 2), 6)
        bins.append({
            "id": f"bin-{i + 1:03d}",
            "lat": lat,
            "lon": lon,
            "depth_cm": 120.0,
            "capacity_l": 300.0,
            "sensor": {"min_range_cm": 2.0, "max_range_cm": 400.0, "mount_offset_cm": 0.0},
            "fault": {"stuck_prob": 0.002, "dropout_prob": 0.002, "noise_sigma_cm": 1.0},
            "arrival_rate_per_day": 8.0 + 4.0 * (i % 3),
            "deposit_volume": {"lognormal_mu": 2.0, "lognormal_sigma": 0.5},
            "reporting_period_ms": 1_800_000,
            "initial_battery_v": 9.0,
        })
    return {
        "scenario_id": "reference-johannesburg-v1",
        "seed": 1,
        "start_epoch_ms": 0,
        "duration_ms": 7 * 86_400_000,
        "bins": bins,
        "trucks": [
            {"id": "truck-1", "capacity_l": 5000.0, "speed_kmh": 30.0,
             "depot_lat": -26.1900, "depot_lon": 28.0300},
            {"id": "truck-2", "capacity_l": 5000.0, "speed_kmh": 30.0,
             "depot_lat": -26.2700, "depot_lon": 28.1300},
        ],
        "channel": {
            "base_latency_ms": 800, "latency_jitter_ms": 1200,
            "loss_prob": 0.02, "duplicate_prob": 0.01, "reorder": False,
        },
        "policies": {
            "alert_threshold": 0.70, "hysteresis": 0.05, "agree_tol": 0.05,
            "dispatch_batch_size": 5, "max_alert_wait_ms": 7_200_000,
            "stale_after_ms": 14_400_000, "dispatch_check_period_ms": 300_000,
        },
        "operator_token": "dev-operator-token",
    }

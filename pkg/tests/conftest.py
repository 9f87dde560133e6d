import json
from pathlib import Path

import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
REFERENCE_SCENARIO_PATH = REPO_ROOT / "scenarios" / "reference.json"

ACCEPTANCE_RESULTS: list[str] = []


def record_acceptance(criterion: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f"  ({detail})" if detail else ""
    ACCEPTANCE_RESULTS.append(f"[ACCEPTANCE] {criterion}: {status}{suffix}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def reference_raw() -> dict:
    with open(REFERENCE_SCENARIO_PATH) as fh:
        return json.load(fh)


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    # the env override must never leak into determinism tests
    monkeypatch.delenv("BINFLEET_SEED", raising=False)


def small_scenario(
    seed: int = 7,
    days: float = 2.0,
    n_bins: int = 6,
    rate_per_day: float = 20.0,
    trucks: bool = True,
    **overrides,
) -> dict:
    raw = {
        "scenario_id": f"test-{seed}",
        "seed": seed,
        "duration_ms": int(days * 86_400_000),
        "bins": [
            {
                "id": f"bin-{i:03d}",
                "lat": -26.20 + 0.01 * (i % 3),
                "lon": 28.04 + 0.01 * (i // 3),
                "depth_cm": 120.0,
                "capacity_l": 240.0,
                "fault": {"dropout_prob": 0.002, "stuck_prob": 0.002, "noise_sigma_cm": 1.0},
                "arrival_rate_per_day": rate_per_day,
                "deposit_volume": {"lognormal_mu": 2.2, "lognormal_sigma": 0.5},
                "reporting_period_ms": 1_800_000,
            }
            for i in range(n_bins)
        ],
        "trucks": (
            [{"id": "truck-1", "capacity_l": 4000.0, "speed_kmh": 30.0,
              "depot_lat": -26.19, "depot_lon": 28.03}]
            if trucks else []
        ),
    }
    raw.update(overrides)
    return raw

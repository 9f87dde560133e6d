import json
import socket
import subprocess
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

from binfleet.cli import (
    EXIT_BIND, EXIT_CONFIG, EXIT_CORRUPT_LOG, EXIT_REPORT_MISMATCH, EXIT_TOO_LARGE, main,
)
from conftest import small_scenario


@pytest.fixture()
def runner():
    return CliRunner()


def write_config(path: Path, raw: dict) -> str:
    path.write_text(json.dumps(raw))
    return str(path)


class TestSimulate:
    def test_minimal_config_writes_outputs(self, runner, tmp_path):
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.5))
        out = tmp_path / "out"
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "events.ndjson").exists()
        assert (out / "report.json").exists()

    def test_duplicate_bin_id_exits_2_naming_it(self, runner, tmp_path):
        raw = small_scenario(n_bins=2)
        raw["bins"][1]["id"] = raw["bins"][0]["id"]
        cfg = write_config(tmp_path / "c.json", raw)
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path / "o")])
        assert result.exit_code == EXIT_CONFIG
        assert raw["bins"][0]["id"] in result.output

    def test_same_config_twice_byte_identical_log(self, runner, tmp_path):
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.5))
        for name in ("a", "b"):
            result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path / name)])
            assert result.exit_code == 0
        assert (tmp_path / "a" / "events.ndjson").read_bytes() == \
               (tmp_path / "b" / "events.ndjson").read_bytes()

    def test_env_seed_override_changes_log(self, runner, tmp_path, monkeypatch):
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.25))
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path / "a")])
        assert result.exit_code == 0
        monkeypatch.setenv("BINFLEET_SEED", "999")
        result = runner.invoke(main, ["simulate", "--config", cfg, "--out", str(tmp_path / "b")])
        assert result.exit_code == 0
        header = json.loads((tmp_path / "b" / "events.ndjson").read_text().splitlines()[0])
        assert header["seed"] == 999
        assert (tmp_path / "a" / "events.ndjson").read_bytes() != \
               (tmp_path / "b" / "events.ndjson").read_bytes()


class TestReplay:
    def make_run(self, runner, tmp_path) -> Path:
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.5))
        out = tmp_path / "out"
        assert runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)]).exit_code == 0
        return out

    def test_replay_totals_equal_report(self, runner, tmp_path):
        out = self.make_run(runner, tmp_path)
        replayed = runner.invoke(main, ["replay", str(out / "events.ndjson")])
        assert replayed.exit_code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["final_state_hash"] in replayed.output
        assert str(report["totals"]["deposits"]) in replayed.output

    def test_truncated_line_exits_4_with_line_number(self, runner, tmp_path):
        out = self.make_run(runner, tmp_path)
        log = out / "events.ndjson"
        content = log.read_bytes()
        log.write_bytes(content[: len(content) - 30])  # cut mid-line
        result = runner.invoke(main, ["replay", str(log)])
        assert result.exit_code == EXIT_CORRUPT_LOG
        assert "line" in result.output

    def test_empty_file_missing_header(self, runner, tmp_path):
        log = tmp_path / "empty.ndjson"
        log.write_text("")
        result = runner.invoke(main, ["replay", str(log)])
        assert result.exit_code == EXIT_CORRUPT_LOG
        assert "MISSING_HEADER" in result.output


class TestPlan:
    def problem_file(self, tmp_path, n: int) -> str:
        stops = [
            {"id": f"s{i:02d}", "lat": -26.2 + 0.01 * (i % 4), "lon": 28.0 + 0.01 * (i // 4)}
            for i in range(n)
        ]
        path = tmp_path / "problem.json"
        path.write_text(json.dumps({"depot": {"lat": -26.25, "lon": 27.95}, "stops": stops}))
        return str(path)

    def test_plan_prints_both_tours(self, runner, tmp_path):
        result = runner.invoke(main, ["plan", self.problem_file(tmp_path, 6)])
        assert result.exit_code == 0
        assert "nearest-neighbor" in result.output
        assert "2-opt" in result.output

    def test_oracle_flag_adds_optimum(self, runner, tmp_path):
        result = runner.invoke(main, ["plan", self.problem_file(tmp_path, 6), "--oracle"])
        assert result.exit_code == 0
        assert "optimum" in result.output

    def test_oracle_too_large_exits_6(self, runner, tmp_path):
        result = runner.invoke(main, ["plan", self.problem_file(tmp_path, 11), "--oracle"])
        assert result.exit_code == EXIT_TOO_LARGE
        assert "TOO_LARGE" in result.output


class TestVerifyReport:
    def test_verify_fresh_run(self, runner, tmp_path):
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.5))
        out = tmp_path / "out"
        runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)])
        result = runner.invoke(main, ["verify-report", str(out)])
        assert result.exit_code == 0
        assert "verified" in result.output

    def test_tampered_report_exits_7(self, runner, tmp_path):
        cfg = write_config(tmp_path / "c.json", small_scenario(days=0.5))
        out = tmp_path / "out"
        runner.invoke(main, ["simulate", "--config", cfg, "--out", str(out)])
        report = json.loads((out / "report.json").read_text())
        report["totals"]["deposits"] += 1
        (out / "report.json").write_text(json.dumps(report))
        result = runner.invoke(main, ["verify-report", str(out)])
        assert result.exit_code == EXIT_REPORT_MISMATCH


class TestServeBindFailure:
    def test_occupied_port_exits_5(self, tmp_path):
        blocker = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        blocker.bind(("127.0.0.1", 0))
        blocker.listen(1)
        port = blocker.getsockname()[1]
        try:
            cfg = write_config(tmp_path / "c.json", small_scenario(days=0.1))
            proc = subprocess.run(
                [sys.executable, "-m", "binfleet.cli", "serve",
                 "--config", cfg, "--http", f"127.0.0.1:{port}",
                 "--telemetry", "127.0.0.1:0", "--out", str(tmp_path / "srv")],
                capture_output=True, text=True, timeout=30,
            )
            assert proc.returncode == EXIT_BIND
            assert "cannot bind" in proc.stderr
        finally:
            blocker.close()

    def test_help_documents_exit_codes(self):
        runner = CliRunner()
        result = runner.invoke(main, ["--help"])
        assert result.exit_code == 0
        for code in ("2", "4", "5", "6", "7"):
            assert code in result.output

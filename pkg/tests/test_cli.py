"""Command-line surface: arguments, exit codes, offline workflows."""

import json

import pytest
from click.testing import CliRunner

from clic.cli import EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from clic.scenario import run_scenario
from test_scenario import short_config


@pytest.fixture()
def runner():
    return CliRunner()


class TestSimRun:
    def scenario_file(self, tmp_path, **kw):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(short_config(**kw).to_json()))
        return str(path)

    def test_prints_metrics_and_writes_log(self, runner, tmp_path):
        out = tmp_path / "run.jsonl"
        r = runner.invoke(main, ["sim", "run",
                                 "--scenario", self.scenario_file(tmp_path),
                                 "--seed", "3", "--out", str(out)])
        assert r.exit_code == EXIT_OK
        body = json.loads(r.output)
        assert body["channels_ok"] is True
        assert body["metrics"]["messages_lost"] == 0.0
        assert out.exists()

    def test_same_seed_same_output(self, runner, tmp_path):
        args = ["sim", "run", "--scenario", self.scenario_file(tmp_path),
                "--seed", "5"]
        a = runner.invoke(main, args)
        b = runner.invoke(main, args)
        assert a.output == b.output

    def test_missing_scenario_file_is_io_error(self, runner):
        r = runner.invoke(main, ["sim", "run", "--scenario", "/nope.json"])
        assert r.exit_code == EXIT_IO

    def test_bad_scenario_json_is_validation_error(self, runner, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{oops")
        r = runner.invoke(main, ["sim", "run", "--scenario", str(bad)])
        assert r.exit_code == EXIT_VALIDATION


class TestReplayCommand:
    def test_replays_scenario_log(self, runner, tmp_path):
        path = tmp_path / "run.jsonl"
        run_scenario(short_config(), seed=7, log_path=str(path))
        r = runner.invoke(main, ["replay", "--log", str(path)])
        assert r.exit_code == EXIT_OK
        assert json.loads(r.output)["match"] is True

    def test_missing_log_is_io_error(self, runner):
        r = runner.invoke(main, ["replay", "--log", "/nope.jsonl"])
        assert r.exit_code == EXIT_IO

    def test_corrupt_log_is_validation_error(self, runner, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("{broken\n")
        r = runner.invoke(main, ["replay", "--log", str(path)])
        assert r.exit_code == EXIT_VALIDATION

    def test_tampered_log_is_validation_error(self, runner, tmp_path):
        path = tmp_path / "run.jsonl"
        run_scenario(short_config(), seed=7, log_path=str(path))
        lines = path.read_text().splitlines()
        for n, line in enumerate(lines):
            rec = json.loads(line)
            if rec["type"] == "ContractProposed":
                rec["payload"]["agreed_price"] += 1.0
                lines[n] = json.dumps(rec)
                break
        path.write_text("\n".join(lines) + "\n")
        r = runner.invoke(main, ["replay", "--log", str(path)])
        assert r.exit_code == EXIT_VALIDATION


class TestSubmit:
    def test_requires_exactly_one_input(self, runner):
        r = runner.invoke(main, ["submit", "--registry", "http://localhost:1"])
        assert r.exit_code == EXIT_VALIDATION

    def test_local_translation_failure(self, runner, tmp_path):
        spec = tmp_path / "goal.json"
        spec.write_text(json.dumps({"goal": "teleport", "args": {}}))
        plans = tmp_path / "plans.json"
        plans.write_text(json.dumps({"templates": {}}))
        r = runner.invoke(main, ["submit", "--teleological", str(spec),
                                 "--plans", str(plans),
                                 "--registry", "http://localhost:1"])
        assert r.exit_code == EXIT_VALIDATION

    def test_unreachable_registry_is_io_error(self, runner, tmp_path):
        bp = tmp_path / "bp.json"
        bp.write_text(json.dumps({"system_id": "x"}))
        r = runner.invoke(main, ["submit", "--blueprint", str(bp),
                                 "--registry", "http://127.0.0.1:9"])
        assert r.exit_code == EXIT_IO


class TestConfigFile:
    def test_config_file_provides_defaults(self, runner, tmp_path):
        out = tmp_path / "run.jsonl"
        scenario = tmp_path / "scenario.json"
        scenario.write_text(json.dumps(short_config().to_json()))
        cfg = tmp_path / "clic.json"
        cfg.write_text(json.dumps({
            "sim": {"run": {"scenario": str(scenario), "seed": 9,
                            "out": str(out)}},
        }))
        r = runner.invoke(main, ["--config", str(cfg), "sim", "run"])
        assert r.exit_code == EXIT_OK
        assert json.loads(r.output)["seed"] == 9
        assert out.exists()

    def test_unreadable_config_is_io_error(self, runner):
        r = runner.invoke(main, ["--config", "/nope.json", "sim", "run"])
        assert r.exit_code == EXIT_IO

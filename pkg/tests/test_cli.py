import json

import pytest

from drainsched.cli import main

SMALL_YAML = """
network:
  nodes: [[0.0, 0.0], [0.5, 0.0]]
  links: [[0, 1]]
  flows:
    - {source: 0, destination: 1, rate_pkts_per_slot: 0.6, routes: [[0, 1]]}
channel: {gain_model: fixed, fixed_gain: 4.0}
control: {safety_stock_pkts: 0}
run: {horizon_slots: 300, seeds: [1]}
"""


@pytest.fixture()
def config_path(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_YAML)
    return path


class TestRunCommand:
    def test_run_writes_metrics(self, config_path, tmp_path, capsys):
        out = tmp_path / "out"
        status = main(["run", "--config", str(config_path), "--out", str(out)])
        assert status == 0
        assert (out / "metrics_seed1.csv").exists()
        assert "flow 1" in capsys.readouterr().out

    def test_run_json_format_and_seed_override(self, config_path, tmp_path):
        out = tmp_path / "out"
        status = main(
            ["run", "--config", str(config_path), "--out", str(out),
             "--format", "json", "--seed", "9", "--horizon", "100"]
        )
        assert status == 0
        payload = json.loads((out / "metrics_seed9.json").read_text())
        assert payload["seed"] == 9
        assert payload["horizon"] == 100

    def test_trace_stream_written(self, config_path, tmp_path):
        out = tmp_path / "out"
        status = main(
            ["run", "--config", str(config_path), "--out", str(out),
             "--horizon", "50", "--trace"]
        )
        assert status == 0
        lines = (out / "trace_seed1.jsonl").read_text().strip().splitlines()
        assert lines
        first = json.loads(lines[0])
        assert {"t", "window", "objective", "queues"} <= set(first)

    def test_config_error_exit_code_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.yaml"
        bad.write_text("network: {nodes: [], links: [], flows: []}")
        status = main(["run", "--config", str(bad), "--out", str(tmp_path)])
        assert status == 1
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file_exit_code_2(self, tmp_path, capsys):
        status = main(["run", "--config", str(tmp_path / "nope.yaml"),
                       "--out", str(tmp_path)])
        assert status == 2


class TestPresetCommand:
    def test_custom_preset_runs(self, config_path, tmp_path):
        out = tmp_path / "exp"
        status = main(
            ["preset", "custom", "--config", str(config_path), "--out", str(out),
             "--seed", "1", "--seed", "2", "--horizon", "150"]
        )
        assert status == 0
        assert (out / "custom_runs.csv").exists()
        assert (out / "custom_summary.json").exists()


class TestOracleCheckCommand:
    def test_oracle_check_passes(self, capsys):
        status = main(["oracle-check", "--instances", "10"])
        assert status == 0
        out = capsys.readouterr().out
        assert "10 instances" in out
        assert "failures 0" in out

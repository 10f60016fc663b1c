import json
import os
import subprocess
import sys

import pytest

from quadvar import cli


def run_cli(args, tmp_path, env=None):
    cmd = [sys.executable, "-m", "quadvar.cli", *args]
    merged = dict(os.environ)
    if env:
        merged.update(env)
    return subprocess.run(
        cmd, capture_output=True, text=True, cwd=tmp_path, env=merged, timeout=600
    )


class TestExitCodes:
    def test_oscillator_qv_prints_exact_value(self, tmp_path):
        res = run_cli(["qv", "--model", "oscillator", "--n", "5", "--out", "o"], tmp_path)
        assert res.returncode == 0
        assert "0.984375" in res.stdout

    def test_malformed_config_exits_2_without_outputs(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"replicas": "many"}))
        out = tmp_path / "outdir"
        res = run_cli(
            ["experiment", "--config", str(bad), "--scenario", "x2_add_noise", "--out", str(out)],
            tmp_path,
        )
        assert res.returncode == 2
        assert not out.exists()

    def test_unknown_scenario_exits_2(self, tmp_path):
        res = run_cli(["experiment", "--seed", "1", "--out", "o"], tmp_path)
        assert res.returncode == 2

    def test_missing_seed_exits_2(self, tmp_path):
        res = run_cli(["simulate", "--model", "bm_cp", "--out", "o"], tmp_path)
        assert res.returncode == 2

    def test_resource_limit_exits_4(self, tmp_path):
        res = run_cli(
            ["simulate", "--model", "bm_cp", "--seed", "1", "--grid-level", "25", "--out", "o"],
            tmp_path,
        )
        assert res.returncode == 4

    def test_unsupported_model_exits_3(self):
        # exception mapping, exercised through the entry point
        from quadvar.errors import UnsupportedModelError

        def boom(cfg):
            raise UnsupportedModelError("nope")

        original = cli.COMMANDS["check"]
        cli.COMMANDS["check"] = boom
        try:
            assert cli.run(["check"]) == cli.EXIT_UNSUPPORTED
        finally:
            cli.COMMANDS["check"] = original


class TestCommands:
    def test_check_passes(self, tmp_path):
        res = run_cli(["check", "--replicas", "25", "--level", "8", "--seed", "3"], tmp_path)
        assert res.returncode == 0
        assert "check: PASS" in res.stdout

    def test_simulate_round_trip(self, tmp_path):
        res = run_cli(
            ["simulate", "--model", "bm_cp", "--seed", "4", "--level", "6", "--out", "sim"],
            tmp_path,
        )
        assert res.returncode == 0
        from quadvar.paths import CadlagPath

        target = tmp_path / "sim" / "bm_cp_seed4_level6.json"
        path = CadlagPath.from_json(target.read_text())
        assert path.horizon == 1.0

    def test_truncate_writes_medians(self, tmp_path):
        res = run_cli(
            [
                "truncate", "--model", "bm_cp_dense", "--seed", "2", "--replicas", "20",
                "--grid-level", "7", "--level", "7", "--a-grid", "0.5", "0.1", "--out", "tr",
            ],
            tmp_path,
        )
        assert res.returncode == 0
        lines = (tmp_path / "tr" / "truncate_bm_cp_dense_compensated.csv").read_text().splitlines()
        assert lines[0] == "a,sup_dist_median,qv_dist_median"
        assert len(lines) == 3

    def test_integrate_reports_surrogate(self, tmp_path):
        res = run_cli(
            ["integrate", "--model", "bm_cp", "--seed", "9", "--level", "8", "--out", "ig"],
            tmp_path,
        )
        assert res.returncode == 0
        assert "level_sup_distance" in res.stdout

    def test_experiment_outputs_and_reproducibility(self, tmp_path):
        args = [
            "experiment", "--scenario", "poisson_scale_double_limit", "--seed", "5",
            "--replicas", "60", "--out", "e1", "--format", "json",
        ]
        first = run_cli(args, tmp_path)
        assert first.returncode == 0
        args[args.index("e1")] = "e2"
        second = run_cli(args, tmp_path)
        csv1 = (tmp_path / "e1" / "experiment_poisson_scale_double_limit.csv").read_bytes()
        csv2 = (tmp_path / "e2" / "experiment_poisson_scale_double_limit.csv").read_bytes()
        assert csv1 == csv2
        doc = json.loads((tmp_path / "e1" / "experiment_poisson_scale_double_limit.json").read_text())
        assert doc["config"]["seed"] == 5
        assert "a_grid" in doc

    def test_worker_pool_matches_serial(self, tmp_path):
        args = [
            "experiment", "--scenario", "x2_add_noise", "--seed", "7",
            "--replicas", "24", "--level", "8", "--out", "serial",
        ]
        serial = run_cli(args, tmp_path)
        assert serial.returncode == 0
        args[args.index("serial")] = "pooled"
        pooled = run_cli(args, tmp_path, env={"QV_THREADS": "3"})
        assert pooled.returncode == 0
        assert (tmp_path / "serial" / "experiment_x2_add_noise.csv").read_bytes() == (
            tmp_path / "pooled" / "experiment_x2_add_noise.csv"
        ).read_bytes()

    def test_config_file_drives_run(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(
            json.dumps(
                {
                    "scenario": "x2_add_noise",
                    "seed": 9,
                    "replicas": 10,
                    "level": 8,
                    "n_grid": [2, 4],
                    "out": "cfgout",
                }
            )
        )
        res = run_cli(["experiment", "--config", str(cfg)], tmp_path)
        assert res.returncode == 0
        assert (tmp_path / "cfgout" / "experiment_x2_add_noise.csv").exists()

"""Harness: training artifacts, evaluation aggregation, CSV export, CLI."""

import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from uavirl import harness, world
from uavirl.baselines import shortest_path_policy
from uavirl.cli import main as cli_main
from uavirl.errors import ConfigError
from uavirl.harness import (
    CSV_HEADER,
    MetricsRow,
    RunConfig,
    evaluate,
    evaluate_artifact,
    export_metrics,
    generate_scenario_file,
    load_model,
    parse_metrics_csv,
    policy_from_model,
    run_training,
    unseen_start_eval,
)
from uavirl.policies import rollout
from uavirl.world import hex_distance, scenario_id


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenario") / "default.json"
    generate_scenario_file(path, seed=42)
    return path


def run_cfg(scenario_file, out, kind, **kwargs):
    defaults = dict(
        scenario_path=scenario_file,
        learner_kind=kind,
        out_dir=out,
        master_seed=42,
    )
    defaults.update(kwargs)
    return RunConfig(**defaults)


class TestTrainingRuns:
    def test_bc_smoke(self, scenario_file, tmp_path):
        artifacts = run_training(run_cfg(scenario_file, tmp_path / "bc", "bc"))
        assert artifacts["model"].is_file()
        report = json.loads(artifacts["report"].read_text())
        assert report["heldout_accuracy"] >= 0.85
        assert report["tree_leaves"] >= 2
        doc = load_model(artifacts["model"])
        assert doc["kind"] == "bc"

    def test_irl_threshold_short_circuit(self, scenario_file, tmp_path, capsys):
        artifacts = run_training(
            run_cfg(
                scenario_file, tmp_path / "irl", "irl-dqn",
                eps_irl=1e9, num_eps=40, eval_runs=2,
            )
        )
        log = json.loads(artifacts["irl_log"].read_text())
        assert len(log["iterations"]) == 1
        assert log["converged"]
        for key in ("weights", "model", "irl_log", "training_curve", "expert"):
            assert key in artifacts
        out = capsys.readouterr().out
        assert "hyper-distance" in out  # iteration table printed

    def test_rerun_byte_identical(self, scenario_file, tmp_path):
        cfg_a = run_cfg(scenario_file, tmp_path / "a", "irl-dqn", eps_irl=1e9, num_eps=40, eval_runs=2)
        cfg_b = run_cfg(scenario_file, tmp_path / "b", "irl-dqn", eps_irl=1e9, num_eps=40, eval_runs=2)
        arts_a = run_training(cfg_a)
        arts_b = run_training(cfg_b)
        for key in ("weights", "model", "irl_log", "training_curve"):
            assert arts_a[key].read_bytes() == arts_b[key].read_bytes()
        # expert stores byte-identical too
        files_a = sorted((tmp_path / "a" / "expert").glob("*.jsonl"))
        files_b = sorted((tmp_path / "b" / "expert").glob("*.jsonl"))
        assert [f.name for f in files_a] == [f.name for f in files_b]
        for fa, fb in zip(files_a, files_b):
            assert fa.read_bytes() == fb.read_bytes()

    def test_baseline_artifacts(self, scenario_file, tmp_path):
        for kind in ("shortest", "random"):
            artifacts = run_training(run_cfg(scenario_file, tmp_path / kind, kind))
            doc = load_model(artifacts["model"])
            assert doc["kind"] == kind
            assert "seed" in doc

    def test_unknown_kind_rejected(self, scenario_file, tmp_path):
        with pytest.raises(ConfigError):
            run_training(run_cfg(scenario_file, tmp_path, "magic"))

    def test_lfa_kind_produces_matrix(self, scenario_file, tmp_path):
        artifacts = run_training(
            run_cfg(scenario_file, tmp_path / "lfa", "irl-lfa", eps_irl=1e9, num_eps=30, eval_runs=2)
        )
        doc = load_model(artifacts["model"])
        theta = np.asarray(doc["theta"])
        assert theta.shape == (36, 6)


class TestEvaluate:
    def test_deterministic_policy_zero_std(self, scenario, scenario_file, tmp_path):
        artifacts = run_training(run_cfg(scenario_file, tmp_path / "bc", "bc"))
        rows, summary = evaluate_artifact(artifacts["model"], scenario, eval_runs=25)
        assert summary["reached_fraction"] == 1.0
        for row in rows:
            assert row.throughput_std == 0.0
            assert row.interference_std == 0.0

    def test_shortest_reaches_at_hex_distance(self, scenario):
        policy = shortest_path_policy(scenario, seed=77)
        rows, summary = evaluate(policy, scenario, eval_runs=25)
        d = hex_distance(scenario.source_cell, scenario.dest_cell)
        assert set(summary["steps_to_done"]) == {d}
        assert summary["mean_final_distance"] == 0.0

    def test_single_run_equals_rollout(self, scenario):
        policy = shortest_path_policy(scenario, seed=3)
        rows, summary = evaluate(policy, scenario, eval_runs=1)
        traj, metrics = rollout(scenario, policy, run_index=0, source="p")
        assert len(rows) == len(metrics)
        for row, m in zip(rows, metrics):
            assert row.throughput_mean == m.throughput_bps
            assert row.interference_mean == m.interference_w
            assert row.distance == m.hex_dist_to_dest

    def test_scenario_mismatch_rejected(self, scenario_file, tmp_path):
        artifacts = run_training(run_cfg(scenario_file, tmp_path / "bc", "bc"))
        other = world.build_scenario(world.ScenarioConfig(), seed=999)
        with pytest.raises(ConfigError):
            evaluate_artifact(artifacts["model"], other)

    def test_reward_column_accumulates(self, scenario):
        policy = shortest_path_policy(scenario, seed=3)
        w = np.array([0, 0, 1.0, 0, 0])
        rows, _ = evaluate(policy, scenario, eval_runs=1, reward_weights=w)
        # success feature only fires at the terminal step
        assert rows[-1].reward == pytest.approx(1.0)
        assert rows[0].reward == 0.0


class TestUnseenStart:
    def test_report_shape_and_degenerate_start(self, scenario, scenario_file, tmp_path):
        artifacts = run_training(run_cfg(scenario_file, tmp_path / "bc", "bc"))
        report = unseen_start_eval({"bc": artifacts["model"]}, scenario, start_cell_index=0)
        entry = report["methods"]["bc"]
        traj, _ = rollout(
            scenario, policy_from_model(load_model(artifacts["model"]), scenario),
            source="policy:bc",
        )
        assert entry["path_cells"] == [world.cell_index(scenario, r.cell) for r in traj.steps]
        assert entry["reached"]

    def test_bs5_bc_fails(self, scenario, scenario_file, tmp_path):
        artifacts = run_training(run_cfg(scenario_file, tmp_path / "bc", "bc"))
        report = unseen_start_eval({"bc": artifacts["model"]}, scenario, start_cell_index=5)
        assert report["methods"]["bc"]["reached"] is False


class TestCsvExport:
    def test_single_row_two_lines(self, tmp_path):
        rows = [MetricsRow(0, 1.5e7, 0.0, 2e-10, 0.0, 5.0, 0.25)]
        path = export_metrics(rows, tmp_path / "m.csv")
        lines = path.read_text().splitlines()
        assert len(lines) == 2
        assert lines[0] == CSV_HEADER

    def test_round_trip_12_digits(self, tmp_path, rng):
        rows = [
            MetricsRow(
                i,
                float(rng.uniform(0, 2e7)),
                float(rng.uniform(0, 1e6)),
                float(rng.uniform(0, 1e-8)),
                float(rng.uniform(0, 1e-9)),
                float(rng.integers(0, 7)),
                float(rng.normal()),
            )
            for i in range(8)
        ]
        path = export_metrics(rows, tmp_path / "m.csv")
        parsed = parse_metrics_csv(path)
        for a, b in zip(rows, parsed):
            assert b.index == a.index
            for field in (
                "throughput_mean", "throughput_std", "interference_mean",
                "interference_std", "distance", "reward",
            ):
                assert getattr(b, field) == pytest.approx(getattr(a, field), rel=1e-11)

    def test_deterministic_bytes(self, tmp_path):
        rows = [MetricsRow(0, 1.23456789, 0.0, 1e-10, 0.0, 3.0, 0.5)]
        a = export_metrics(rows, tmp_path / "a.csv").read_bytes()
        b = export_metrics(rows, tmp_path / "b.csv").read_bytes()
        assert a == b

    def test_header_golden(self):
        assert (
            CSV_HEADER
            == "index,throughput_mean,throughput_std,interference_mean,interference_std,distance,reward"
        )

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            export_metrics([], tmp_path / "m.csv")


class TestCli:
    def test_scenario_gen_and_expert_gen(self, tmp_path):
        runner = CliRunner()
        scenario_path = tmp_path / "sc.json"
        result = runner.invoke(cli_main, ["scenario", "gen", "--seed", "42", "--out", str(scenario_path)])
        assert result.exit_code == 0, result.output
        assert scenario_path.is_file()

        result = runner.invoke(
            cli_main,
            ["expert", "gen", "--scenario", str(scenario_path), "--out", str(tmp_path / "expert"), "--n", "3"],
        )
        assert result.exit_code == 0, result.output
        assert len(list((tmp_path / "expert").glob("*.jsonl"))) == 3

    def test_train_eval_flow(self, tmp_path):
        runner = CliRunner()
        scenario_path = tmp_path / "sc.json"
        runner.invoke(cli_main, ["scenario", "gen", "--seed", "42", "--out", str(scenario_path)])
        result = runner.invoke(
            cli_main,
            ["train", "--scenario", str(scenario_path), "--kind", "bc", "--seed", "42",
             "--out", str(tmp_path / "bc")],
        )
        assert result.exit_code == 0, result.output
        result = runner.invoke(
            cli_main,
            ["eval", "--artifact", str(tmp_path / "bc" / "model.json"),
             "--scenario", str(scenario_path), "--runs", "5", "--out", str(tmp_path / "eval")],
        )
        assert result.exit_code == 0, result.output
        assert (tmp_path / "eval" / "metrics.csv").is_file()
        assert (tmp_path / "eval" / "summary.json").is_file()

    def test_config_error_exit_code(self, tmp_path):
        runner = CliRunner()
        result = runner.invoke(
            cli_main,
            ["eval", "--artifact", str(tmp_path / "missing.json"),
             "--scenario", str(tmp_path / "nope.json"), "--out", str(tmp_path / "o")],
        )
        assert result.exit_code == 2

    def test_unseen_eval_cli(self, tmp_path):
        runner = CliRunner()
        scenario_path = tmp_path / "sc.json"
        runner.invoke(cli_main, ["scenario", "gen", "--seed", "42", "--out", str(scenario_path)])
        runner.invoke(
            cli_main,
            ["train", "--scenario", str(scenario_path), "--kind", "bc", "--seed", "42",
             "--out", str(tmp_path / "bc")],
        )
        runner.invoke(
            cli_main,
            ["train", "--scenario", str(scenario_path), "--kind", "shortest", "--seed", "42",
             "--out", str(tmp_path / "sp")],
        )
        result = runner.invoke(
            cli_main,
            ["unseen-eval", "--scenario", str(scenario_path),
             "--bc", str(tmp_path / "bc" / "model.json"),
             "--dqn", str(tmp_path / "sp" / "model.json"),
             "--start", "5", "--out", str(tmp_path / "unseen")],
        )
        assert result.exit_code == 0, result.output
        report = json.loads((tmp_path / "unseen" / "unseen_report.json").read_text())
        assert report["methods"]["bc"]["reached"] is False

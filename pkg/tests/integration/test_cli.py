"""Integration tests — the command line end to end on tiny synthetic runs."""
import json

import numpy as np
import pandas as pd
import pytest

from app.cli import EXIT_OK, EXIT_USAGE, main
from app.engine.metrics import completion_rate
from app.services.trace_service import load_trace
from tests.conftest import small_config


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Config file plus one trained forecaster and agent shared by the module."""
    root = tmp_path_factory.mktemp("cli")
    config_path = root / "config.json"
    config_path.write_text(json.dumps(small_config(root).model_dump(mode="json")), encoding="utf-8")
    runs = root / "runs"

    assert main(["train-forecaster", "--config", str(config_path), "--epochs", "1", "--run-name", "fc"]) == EXIT_OK
    forecaster = runs / "fc" / "forecaster.npz"
    assert main(
        [
            "train-agent", "--config", str(config_path), "--forecaster", str(forecaster),
            "--episodes", "2", "--steps", "10", "--eval-steps", "20", "--run-name", "ag",
        ]
    ) == EXIT_OK
    return {"config": str(config_path), "runs": runs, "forecaster": str(forecaster), "agent": str(runs / "ag" / "agent_final.npz")}


def _evaluate(workspace, run_name: str, *extra: str) -> int:
    return main(
        [
            "evaluate", "--config", workspace["config"], "--forecaster", workspace["forecaster"],
            "--agent", workspace["agent"], "--eval-steps", "20", "--run-name", run_name, *extra,
        ]
    )


def _error_code(capsys) -> str:
    last = capsys.readouterr().err.strip().splitlines()[-1]
    return json.loads(last)["error"]["code"]


# ── synth ────────────────────────────────────────────────────────────────────

def test_synth_writes_a_loadable_trace(tmp_path):
    path = tmp_path / "flat.csv"
    assert main(["synth", "flat", "--steps", "50", "--seed", "3", "--out", str(path)]) == EXIT_OK
    assert len(load_trace(path)) == 50


def test_synth_single_step(tmp_path):
    path = tmp_path / "one.csv"
    assert main(["synth", "event-spike", "--steps", "1", "--out", str(path)]) == EXIT_OK
    assert len(load_trace(path)) == 1


def test_synth_rejects_zero_steps(tmp_path, capsys):
    assert main(["synth", "flat", "--steps", "0", "--out", str(tmp_path / "x.csv")]) == EXIT_USAGE
    assert _error_code(capsys) == "USAGE"


# ── Usage errors ─────────────────────────────────────────────────────────────

def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["--help"])
    assert exc_info.value.code == 0
    assert "env.v_max" in capsys.readouterr().out


def test_unknown_command_exits_one():
    with pytest.raises(SystemExit) as exc_info:
        main(["deploy"])
    assert exc_info.value.code == EXIT_USAGE


def test_invalid_override_exits_one(tmp_path, capsys):
    assert main(["train-forecaster", "--set", "sac.gamma=1.5", "--out", str(tmp_path)]) == EXIT_USAGE
    assert _error_code(capsys) == "INVALID_VALUE"


def test_unknown_key_exits_one(tmp_path, capsys):
    assert main(["train-forecaster", "--set", "sac.gama=0.9", "--out", str(tmp_path)]) == EXIT_USAGE
    assert _error_code(capsys) == "UNKNOWN_KEY"


def test_malformed_override_exits_one(capsys):
    assert main(["train-forecaster", "--set", "sac.gamma"]) == EXIT_USAGE
    assert _error_code(capsys) == "USAGE"


def test_missing_config_file_exits_one(tmp_path, capsys):
    assert main(["train-forecaster", "--config", str(tmp_path / "absent.json")]) == EXIT_USAGE
    assert _error_code(capsys) == "MISSING_FILE"


def test_missing_test_trace_fails_before_training(workspace, tmp_path, capsys):
    code = main(
        [
            "train-forecaster", "--config", workspace["config"], "--test", str(tmp_path / "absent.csv"),
            "--out", str(tmp_path / "runs"),
        ]
    )
    assert code == EXIT_USAGE
    assert _error_code(capsys) == "MISSING_FILE"
    assert not (tmp_path / "runs").exists()


def test_train_agent_requires_a_forecaster(workspace, capsys):
    assert main(["train-agent", "--config", workspace["config"], "--run-name", "nofc"]) == EXIT_USAGE
    assert _error_code(capsys) == "ARTIFACT_NOT_FOUND"


def test_evaluating_sac_requires_an_agent(workspace, capsys):
    assert main(["evaluate", "--config", workspace["config"], "--run-name", "noagent"]) == EXIT_USAGE
    assert _error_code(capsys) == "ARTIFACT_NOT_FOUND"


def test_forecaster_checkpoint_passed_as_agent(workspace, capsys):
    code = main(
        ["evaluate", "--config", workspace["config"], "--agent", workspace["forecaster"], "--run-name", "wrongkind"]
    )
    assert code == EXIT_USAGE
    assert _error_code(capsys) == "CheckpointFormatError"


# ── Workflows ────────────────────────────────────────────────────────────────

def test_forecaster_run_outputs(workspace):
    run = workspace["runs"] / "fc"
    for name in ("forecaster.npz", "forecast.csv", "losses.csv", "forecaster_eval.json", "manifest.json"):
        assert (run / name).is_file(), name
    forecasts = pd.read_csv(run / "forecast.csv")
    assert list(forecasts.columns) == ["t", "d_ran", "d_hat_1", "d_hat_2", "d_hat_3", "spike_prob"]
    assert len(forecasts) == 40
    assert len(pd.read_csv(run / "losses.csv")) == 2
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "train-forecaster"
    assert manifest["seed"] == 7
    assert set(manifest["traces"]) == {"train", "test"}
    assert len(manifest["checkpoints"]["forecaster"]["sha256"]) == 64


def test_agent_run_outputs(workspace):
    run = workspace["runs"] / "ag"
    curves = pd.read_csv(run / "curves.csv")
    assert curves["episode"].tolist() == [1, 2]
    assert (curves["steps"] == 10).all()
    assert (run / "agent_best.npz").is_file() and (run / "agent_final.npz").is_file()
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["outputs"]["episodes"] == 2
    assert not manifest["outputs"]["aborted"]


def test_evaluation_compares_all_policies(workspace):
    assert _evaluate(workspace, "ev") == EXIT_OK
    run = workspace["runs"] / "ev"
    summary = json.loads((run / "summary.json").read_text())
    assert [row["policy"] for row in summary["rows"]] == ["sac", "balanced", "ran_priority"]
    for row in summary["rows"]:
        telemetry = pd.read_csv(run / row["telemetry_file"])
        assert len(telemetry) == 20
        assert row["completion_ran_pct"] == pytest.approx(completion_rate(telemetry["c_ran"], telemetry["d_ran"]))
        assert row["completion_ai_pct"] == pytest.approx(completion_rate(telemetry["c_ai"], telemetry["d_ai"]))
        assert row["mean_reward"] == pytest.approx(telemetry["reward"].mean())
    assert (run / "kpi.jsonl").is_file()
    assert (run / "comparison.txt").read_text().count("\n") >= 4


def test_every_policy_sees_the_same_demand(workspace):
    assert _evaluate(workspace, "ev-demand") == EXIT_OK
    run = workspace["runs"] / "ev-demand"
    frames = [pd.read_csv(run / f"telemetry_{p}.csv") for p in ("sac", "balanced", "ran_priority")]
    for frame in frames[1:]:
        np.testing.assert_array_equal(frame["d_ran"], frames[0]["d_ran"])
        np.testing.assert_array_equal(frame["d_ai"], frames[0]["d_ai"])


def test_single_policy_evaluation(workspace):
    assert _evaluate(workspace, "ev-balanced", "--policy", "balanced") == EXIT_OK
    run = workspace["runs"] / "ev-balanced"
    summary = json.loads((run / "summary.json").read_text())
    assert [row["policy"] for row in summary["rows"]] == ["balanced"]
    assert not (run / "telemetry_sac.csv").exists()
    telemetry = pd.read_csv(run / "telemetry_balanced.csv")
    assert (telemetry["mig_ran"] == 10).all() and (telemetry["mig_ai"] == 10).all()


def test_static_policies_run_without_any_checkpoint(workspace, tmp_path):
    code = main(
        ["evaluate", "--config", workspace["config"], "--policy", "ran_priority", "--out", str(tmp_path), "--run-name", "bare"]
    )
    assert code == EXIT_OK
    telemetry = pd.read_csv(tmp_path / "bare" / "telemetry_ran_priority.csv")
    assert (telemetry["mig_ran"] == 14).all() and (telemetry["mig_ai"] == 6).all()


def test_parallel_and_serial_evaluation_agree(workspace):
    assert _evaluate(workspace, "ev-serial") == EXIT_OK
    assert _evaluate(workspace, "ev-parallel", "--set", "run.parallel_eval=true") == EXIT_OK
    for policy in ("sac", "balanced", "ran_priority"):
        serial = pd.read_csv(workspace["runs"] / "ev-serial" / f"telemetry_{policy}.csv")
        parallel = pd.read_csv(workspace["runs"] / "ev-parallel" / f"telemetry_{policy}.csv")
        pd.testing.assert_frame_equal(serial, parallel)


def test_same_seed_reproduces_training_curves(workspace):
    code = main(
        [
            "train-agent", "--config", workspace["config"], "--forecaster", workspace["forecaster"],
            "--episodes", "2", "--steps", "10", "--eval-steps", "20", "--run-name", "ag-again",
        ]
    )
    assert code == EXIT_OK
    first = (workspace["runs"] / "ag" / "curves.csv").read_bytes()
    second = (workspace["runs"] / "ag-again" / "curves.csv").read_bytes()
    assert first == second


def test_same_seed_reproduces_evaluation(workspace):
    assert _evaluate(workspace, "ev-a") == EXIT_OK
    assert _evaluate(workspace, "ev-b") == EXIT_OK
    for policy in ("sac", "balanced", "ran_priority"):
        name = f"telemetry_{policy}.csv"
        assert (workspace["runs"] / "ev-a" / name).read_bytes() == (workspace["runs"] / "ev-b" / name).read_bytes()

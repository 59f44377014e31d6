"""Unit tests for app/repository: replay buffer, checkpoints and the run store."""
import json
import threading

import numpy as np
import pandas as pd
import pytest
from scipy import stats

from app.repository.checkpoints import (
    HEADER_KEY,
    ArtifactNotFoundError,
    CheckpointFormatError,
    file_sha256,
    load_checkpoint,
    save_checkpoint,
)
from app.repository.replay_buffer import InvalidTransitionError, ReplayBuffer
from app.repository.run_store import InvalidRunIdError, RunStore, telemetry_name


def _push(buffer: ReplayBuffer, reward: float, done: bool = False) -> None:
    buffer.push(np.full(3, reward), np.zeros(2), reward, np.full(3, reward), done)


# ── Replay buffer ────────────────────────────────────────────────────────────

def test_buffer_evicts_oldest_first():
    buffer = ReplayBuffer(capacity=3, state_dim=3, action_dim=2)
    for value in range(5):
        _push(buffer, float(value))
    assert len(buffer) == 3
    np.testing.assert_array_equal(buffer.snapshot().rewards, [2.0, 3.0, 4.0])


def test_buffer_keeps_done_flags():
    buffer = ReplayBuffer(capacity=4, state_dim=3, action_dim=2)
    _push(buffer, 1.0, done=True)
    _push(buffer, 2.0)
    np.testing.assert_array_equal(buffer.snapshot().dones, [1.0, 0.0])


@pytest.mark.parametrize(
    "state, action, reward, field",
    [
        (np.full(3, np.nan), np.zeros(2), 0.0, "state"),
        (np.zeros(3), np.zeros(3), 0.0, "action"),
        (np.zeros(3), np.zeros(2), np.inf, "reward"),
    ],
)
def test_invalid_transitions_rejected(state, action, reward, field):
    buffer = ReplayBuffer(capacity=4, state_dim=3, action_dim=2)
    with pytest.raises(InvalidTransitionError) as exc_info:
        buffer.push(state, action, reward, np.zeros(3), False)
    assert exc_info.value.details["field"] == field
    assert len(buffer) == 0


def test_sample_larger_than_occupancy_raises(rng):
    buffer = ReplayBuffer(capacity=10, state_dim=3, action_dim=2)
    _push(buffer, 1.0)
    with pytest.raises(ValueError):
        buffer.sample(2, rng)


def test_sample_has_no_duplicates(rng):
    buffer = ReplayBuffer(capacity=10, state_dim=3, action_dim=2)
    for value in range(10):
        _push(buffer, float(value))
    batch = buffer.sample(10, rng)
    assert sorted(batch.rewards.tolist()) == [float(v) for v in range(10)]


def test_sampling_is_uniform(rng):
    buffer = ReplayBuffer(capacity=20, state_dim=3, action_dim=2)
    for value in range(20):
        _push(buffer, float(value))
    counts = np.zeros(20)
    for _ in range(2000):
        for reward in buffer.sample(5, rng).rewards:
            counts[int(reward)] += 1
    assert stats.chisquare(counts).pvalue > 0.001


def test_concurrent_pushes_are_all_counted():
    buffer = ReplayBuffer(capacity=1000, state_dim=3, action_dim=2)

    def writer():
        for _ in range(100):
            _push(buffer, 1.0)

    threads = [threading.Thread(target=writer) for _ in range(4)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()
    assert len(buffer) == 400


# ── Checkpoints ──────────────────────────────────────────────────────────────

def test_checkpoint_round_trip(tmp_path):
    path = save_checkpoint(tmp_path / "model", "forecaster", {"a.W": np.eye(2)}, {"note": "x"})
    assert path.suffix == ".npz"
    arrays, meta = load_checkpoint(path, "forecaster")
    np.testing.assert_array_equal(arrays["a.W"], np.eye(2))
    assert meta == {"note": "x"}
    assert len(file_sha256(path)) == 64


def test_reserved_key_rejected(tmp_path):
    with pytest.raises(CheckpointFormatError):
        save_checkpoint(tmp_path / "x.npz", "agent", {HEADER_KEY: np.zeros(1)})


def _write_header(path, header: dict | None):
    payload = {"w": np.zeros(2)}
    if header is not None:
        payload[HEADER_KEY] = np.array(json.dumps(header))
    with open(path, "wb") as fh:
        np.savez(fh, **payload)
    return path


@pytest.mark.parametrize(
    "header",
    [
        None,
        {"format": "other", "version": 1, "kind": "agent"},
        {"format": "airan-params", "version": 2, "kind": "agent"},
        {"format": "airan-params", "version": 1, "kind": "forecaster"},
    ],
    ids=["no-header", "foreign", "version", "kind"],
)
def test_bad_checkpoints_rejected(tmp_path, header):
    path = _write_header(tmp_path / "bad.npz", header)
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path, "agent")


def test_garbage_file_is_a_format_error(tmp_path):
    path = tmp_path / "junk.npz"
    path.write_bytes(b"not an archive")
    with pytest.raises(CheckpointFormatError):
        load_checkpoint(path, "agent")


def test_missing_checkpoint(tmp_path):
    with pytest.raises(ArtifactNotFoundError):
        load_checkpoint(tmp_path / "absent.npz", "agent")


# ── Run store ────────────────────────────────────────────────────────────────

@pytest.mark.parametrize("run_id", ["", "../etc", ".hidden", "a/b", "a..b", "x" * 200])
def test_invalid_run_ids(store, run_id):
    with pytest.raises(InvalidRunIdError) as exc_info:
        store.create_run(run_id)
    assert exc_info.value.code == "INVALID_RUN_ID"


def test_documents_and_frames_round_trip(store):
    store.write_json("run-1", "summary.json", {"b": 1, "a": [0.1]})
    assert store.read_json("run-1", "summary.json") == {"a": [0.1], "b": 1}
    frame = pd.DataFrame({"t": [0, 1], "reward": [0.1, 1 / 3]})
    store.write_frame("run-1", telemetry_name("static"), frame)
    pd.testing.assert_frame_equal(store.read_frame("run-1", "telemetry_static.csv"), frame)


def test_missing_run_and_file(store):
    with pytest.raises(ArtifactNotFoundError):
        store.run_dir("nope")
    store.create_run("run-2")
    with pytest.raises(ArtifactNotFoundError):
        store.read_json("run-2", "manifest.json")
    with pytest.raises(ArtifactNotFoundError):
        store.file_path("run-2", "../manifest.json")


def test_list_runs_only_reports_manifested_runs(store):
    store.write_json("b-run", "manifest.json", {"run_id": "b-run"})
    store.write_json("a-run", "manifest.json", {"run_id": "a-run"})
    store.create_run("empty")
    assert [m["run_id"] for m in store.list_runs()] == ["a-run", "b-run"]


def test_list_runs_on_missing_root(tmp_path):
    assert RunStore(tmp_path / "absent").list_runs() == []

"""Unit tests for the KPI channel and the coexistence environment."""
import numpy as np
import pandas as pd
import pytest

from app.engine.demand import ai_demand_at
from app.engine.forecaster import SpikeAwareLSTM
from app.engine.policies import make_policy
from app.engine.rng import RngStreams
from app.models.config import EnvConfig, ForecasterConfig, SACConfig
from app.models.environment import TELEMETRY_COLUMNS
from app.models.trace import DemandProfile
from app.services.agent_service import AgentLearner, build_agent
from app.services.environment import (
    CoexistenceEnv,
    EpisodeError,
    LstmForecastSource,
    PersistenceForecastSource,
)
from app.services.kpi_channel import kpi_message, live_channel, read_stream, replay_channel, write_stream
from app.services.orchestrator_service import run_episode
from app.validators import ValidationError


def _make_profile(n: int = 12) -> DemandProfile:
    t = np.arange(n)
    return DemandProfile(d_ran=0.5 + 0.4 * np.sin(t / 2.0), d_ai=ai_demand_at(t, n))


def _make_env(**overrides) -> CoexistenceEnv:
    return CoexistenceEnv(EnvConfig(**overrides), PersistenceForecastSource(), ai_period=12)


def _run(env: CoexistenceEnv, channel, steps: int, action=(0.5, -0.5)) -> pd.DataFrame:
    env.reset(channel, steps)
    done = False
    while not done:
        done = env.step(np.array(action)).finished
    return env.telemetry()


# ── KPI channel ──────────────────────────────────────────────────────────────

def test_kpi_indicators():
    message = kpi_message(3, 0.4, 0.6)
    assert message.load_proxy == pytest.approx(0.5)
    assert message.latency_proxy == pytest.approx(1.0 / (1.0 - 0.99 * 0.5))


def test_live_channel_renumbers_from_zero():
    profile = _make_profile()
    messages = list(live_channel(profile, start=4, steps=3))
    assert [m.t for m in messages] == [0, 1, 2]
    assert messages[0].d_ran == pytest.approx(profile.d_ran[4])


def test_live_channel_stops_at_profile_end():
    assert len(list(live_channel(_make_profile(), start=10, steps=5))) == 2


def test_live_channel_rejects_start_outside_profile():
    with pytest.raises(ValueError):
        list(live_channel(_make_profile(), start=12))


def test_recorded_stream_replays_identically(tmp_path):
    profile = _make_profile()
    path = tmp_path / "kpi.jsonl"
    assert write_stream(live_channel(profile), path) == 12
    assert read_stream(path) == list(live_channel(profile))


def _write_lines(path, steps):
    path.write_text(
        "".join(kpi_message(t, 0.2, 0.3).model_dump_json() + "\n" for t in steps), encoding="utf-8"
    )
    return path


@pytest.mark.parametrize("steps, code", [([0, 2], "SEQUENCE_GAP"), ([0, 1, 1], "OUT_OF_ORDER"), ([1], "SEQUENCE_GAP")])
def test_replay_rejects_broken_ordering(tmp_path, steps, code):
    with pytest.raises(ValidationError) as exc_info:
        read_stream(_write_lines(tmp_path / "kpi.jsonl", steps))
    assert exc_info.value.code == code


def test_replay_rejects_garbage_lines(tmp_path):
    path = _write_lines(tmp_path / "kpi.jsonl", [0])
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"t": 1, "d_ran": 2.0}\n')
    with pytest.raises(ValidationError) as exc_info:
        read_stream(path)
    assert exc_info.value.code == "UNPARSEABLE_ROW"
    assert exc_info.value.details["line"] == 2


def test_replay_of_missing_file(tmp_path):
    with pytest.raises(ValidationError) as exc_info:
        next(replay_channel(tmp_path / "absent.jsonl"))
    assert exc_info.value.code == "MISSING_FILE"


# ── Forecast sources ─────────────────────────────────────────────────────────

def test_persistence_source_repeats_last_value():
    bundle = PersistenceForecastSource().forecast(np.array([0.1, 0.7]), 3)
    assert bundle.d_hat == (0.7, 0.7, 0.7)
    assert bundle.spike_prob == 0.0


def test_lstm_source_memoizes_by_window(rng):
    model = SpikeAwareLSTM(ForecasterConfig(seq_len=3, hidden1=3, hidden2=2), rng=rng)
    source = LstmForecastSource(model)
    first = source.forecast(np.array([0.2, 0.3, 0.4]), 2)
    again = source.forecast(np.array([0.9, 0.2, 0.3, 0.4]), 2)
    assert again is first
    source.forecast(np.array([0.4]), 2)
    assert len(source) == 2
    source.clear()
    assert len(source) == 0


# ── Environment ──────────────────────────────────────────────────────────────

def test_reset_builds_the_first_observation():
    env = _make_env(horizon=2)
    state = env.reset(live_channel(_make_profile()), steps=5, initial_allocation=(0.3, 0.2))
    assert state.dimension == 8
    assert (state.r_prev_ran, state.r_prev_ai) == (0.3, 0.2)
    np.testing.assert_allclose(state.d_hat_ai, ai_demand_at(np.array([1, 2]), 12))


def test_ai_forecast_follows_the_offset():
    env = _make_env(horizon=1)
    state = env.reset(live_channel(_make_profile()), steps=5, ai_offset=4)
    assert state.d_hat_ai[0] == pytest.approx(float(ai_demand_at(5, 12)))


def test_step_limit_truncates_without_ending():
    env = _make_env()
    env.reset(live_channel(_make_profile()), steps=3)
    results = [env.step(np.zeros(2)) for _ in range(3)]
    assert [r.truncated for r in results] == [False, False, True]
    assert not any(r.done for r in results)
    assert results[-1].finished
    assert env.steps_done == 3


def test_exhausted_channel_is_a_true_end():
    env = _make_env()
    env.reset(live_channel(_make_profile(), steps=2), steps=5)
    env.step(np.zeros(2))
    result = env.step(np.zeros(2))
    assert result.done and not result.truncated


def test_step_limit_transitions_are_stored_as_not_done():
    env = _make_env()
    streams = RngStreams(0)
    learner = AgentLearner(build_agent(SACConfig(hidden=8, batch=4, warmup_steps=10), env.config.state_dim, streams), streams)
    profile = _make_profile()
    outcome = run_episode(env, make_policy("balanced", env.config), live_channel(profile), 3, learner=learner)
    assert not outcome.ended_early
    np.testing.assert_array_equal(learner.buffer.snapshot().dones, [0.0, 0.0, 0.0])

    outcome = run_episode(env, make_policy("balanced", env.config), live_channel(profile, steps=2), 5, learner=learner)
    assert outcome.ended_early
    np.testing.assert_array_equal(learner.buffer.snapshot().dones, [0.0, 0.0, 0.0, 0.0, 1.0])


def test_step_outside_an_episode_raises():
    env = _make_env()
    with pytest.raises(EpisodeError):
        env.step(np.zeros(2))
    env.reset(live_channel(_make_profile()), steps=1)
    env.step(np.zeros(2))
    with pytest.raises(EpisodeError):
        env.step(np.zeros(2))


def test_empty_channel_raises():
    with pytest.raises(EpisodeError):
        _make_env().reset(iter([]), steps=3)


def test_telemetry_rows_are_consistent():
    env = _make_env()
    telemetry = _run(env, live_channel(_make_profile()), steps=12)
    assert list(telemetry.columns) == TELEMETRY_COLUMNS
    assert telemetry["t"].tolist() == list(range(12))
    np.testing.assert_allclose(telemetry["c_ran"], np.minimum(telemetry["r_ran"], telemetry["d_ran"]))
    assert (telemetry["mig_ran"] + telemetry["mig_ai"] <= 21).all()
    np.testing.assert_allclose(telemetry["r_ran"], telemetry["mig_ran"] / 21)


def test_allocation_changes_respect_rate_limit():
    env = _make_env()
    telemetry = _run(env, live_channel(_make_profile()), steps=12, action=(1.0, -1.0))
    r_ran = np.concatenate([[0.5], telemetry["r_ran"].to_numpy()])
    assert np.all(np.diff(r_ran) <= 0.1 + 1e-12)


def test_replayed_stream_drives_an_identical_episode(tmp_path):
    profile = _make_profile()
    path = tmp_path / "kpi.jsonl"
    live = _run(_make_env(), live_channel(profile), steps=12)
    write_stream(live_channel(profile), path)
    replayed = _run(_make_env(), replay_channel(path), steps=12)
    pd.testing.assert_frame_equal(live, replayed)

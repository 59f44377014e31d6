"""Unit tests for the allocation policies and the episode metrics."""
import numpy as np
import pandas as pd
import pytest

from app.engine.metrics import (
    adaptability,
    assemble_report,
    completion_rate,
    episode_report,
    ideal_ratio,
    utilization,
)
from app.engine.policies import PolicyKind, SacPolicy, StaticPolicy, make_policy
from app.engine.sac import SacAgent
from app.models.config import EnvConfig, SACConfig
from app.models.environment import TELEMETRY_COLUMNS, OrchestratorState


def _state(r_prev=(0.5, 0.5)) -> OrchestratorState:
    return OrchestratorState(
        d_ran=0.4, d_ai=0.3, d_hat_ran=(0.4,), d_hat_ai=(0.3,), r_prev_ran=r_prev[0], r_prev_ai=r_prev[1]
    )


def _make_telemetry(steps: int = 10, **columns) -> pd.DataFrame:
    base = {
        "t": np.arange(steps),
        "d_ran": np.linspace(0.1, 0.9, steps),
        "d_ai": np.full(steps, 0.4),
        "d_hat_ran_1": np.full(steps, 0.5),
        "d_hat_ai_1": np.full(steps, 0.4),
        "r_ran": np.full(steps, 10 / 21),
        "r_ai": np.full(steps, 10 / 21),
        "mig_ran": np.full(steps, 10),
        "mig_ai": np.full(steps, 10),
        "reward": np.ones(steps),
        "c_pred": np.ones(steps),
        "spike_prob": np.zeros(steps),
        "w": np.zeros(steps),
    }
    base.update(columns)
    frame = pd.DataFrame(base)
    frame["c_ran"] = np.minimum(frame["r_ran"], frame["d_ran"])
    frame["c_ai"] = np.minimum(frame["r_ai"], frame["d_ai"])
    return frame[TELEMETRY_COLUMNS]


# ── Policies ─────────────────────────────────────────────────────────────────

def test_static_policies_move_toward_their_split():
    env = EnvConfig()
    balanced = make_policy("balanced", env)
    np.testing.assert_allclose(balanced.act(_state((0.3, 0.6))), [1.0, -1.0])
    np.testing.assert_allclose(balanced.act(_state((0.48, 0.5))), [0.2, 0.0])
    ran_priority = make_policy(PolicyKind.RAN_PRIORITY, env)
    np.testing.assert_allclose(ran_priority.act(_state((0.7, 0.3))), [0.0, 0.0], atol=1e-12)


def test_static_policies_start_at_their_target():
    env = EnvConfig()
    assert make_policy("balanced", env).initial_allocation(env) == (0.5, 0.5)
    assert make_policy("ran_priority", env).initial_allocation(env) == (0.7, 0.3)
    assert not make_policy("balanced", env).learns


def test_sac_policy_needs_an_agent():
    with pytest.raises(ValueError):
        make_policy("sac", EnvConfig())


def test_unknown_policy_rejected():
    with pytest.raises(ValueError):
        make_policy("greedy", EnvConfig())


def test_static_policy_is_not_the_learned_one():
    with pytest.raises(ValueError):
        StaticPolicy(PolicyKind.SAC, 0.1)


def test_sac_policy_acts_deterministically(rng):
    env = EnvConfig(horizon=1)
    agent = SacAgent(SACConfig(hidden=4), env.state_dim, init_rng=rng)
    policy = make_policy("sac", env, agent)
    assert isinstance(policy, SacPolicy)
    np.testing.assert_array_equal(policy.act(_state()), agent.act(_state().to_vector()))
    assert policy.initial_allocation(env) == env.initial_allocation


# ── Metrics ──────────────────────────────────────────────────────────────────

def test_completion_rate_is_a_ratio_of_sums():
    assert completion_rate([0.5, 0.5], [1.0, 1.0]) == pytest.approx(50.0)
    assert completion_rate([0.1, 0.9], [0.5, 1.0]) == pytest.approx(100.0 * 1.0 / 1.5)


def test_zero_demand_is_vacuously_complete():
    assert completion_rate([0.0, 0.0], [0.0, 0.0]) == 100.0


def test_completion_rate_length_mismatch():
    with pytest.raises(ValueError):
        completion_rate([0.1], [0.1, 0.2])


def test_completion_rate_never_drops_as_grants_grow(rng):
    demand = rng.uniform(0.0, 1.0, size=50)
    base = rng.uniform(0.0, 1.0, size=50)
    rates = [completion_rate(np.minimum(base * scale, demand), demand) for scale in np.linspace(0.0, 2.0, 41)]
    assert np.all(np.diff(rates) >= 0.0)
    assert rates[0] == 0.0


def test_ideal_ratio_example():
    assert float(ideal_ratio(0.6, 0.2)) == pytest.approx(0.75)
    assert float(ideal_ratio(0.0, 0.0)) == 0.5


def test_adaptability_example():
    assert adaptability([0.5, 0.5], [0.4, 0.8]) == pytest.approx(0.8)


def test_adaptability_needs_steps():
    with pytest.raises(ValueError):
        adaptability([], [])


def test_adaptability_is_symmetric_in_the_two_channels(rng):
    d_ran, d_ai = rng.uniform(0.05, 1.0, size=(2, 40))
    r_ran, r_ai = rng.uniform(0.05, 1.0, size=(2, 40))
    forward = adaptability(ideal_ratio(d_ran, d_ai), ideal_ratio(r_ran, r_ai))
    swapped = adaptability(ideal_ratio(d_ai, d_ran), ideal_ratio(r_ai, r_ran))
    assert swapped == pytest.approx(forward, rel=1e-12)


def test_utilization():
    assert utilization([10, 14], [10, 6], 21) == pytest.approx(100.0 * 20 / 21)


def test_episode_report_recomputes_from_telemetry():
    telemetry = _make_telemetry()
    report = episode_report("balanced", telemetry, EnvConfig())
    assert report.steps == 10
    assert report.completion_ran_pct == pytest.approx(
        100.0 * telemetry["c_ran"].sum() / telemetry["d_ran"].sum()
    )
    assert report.completion_ai_pct == pytest.approx(100.0)
    assert report.spike_steps == 1
    assert report.mean_reward == 1.0
    assert report.vacuous_channels == []


def test_episode_report_flags_vacuous_channel():
    report = episode_report("balanced", _make_telemetry(d_ai=np.zeros(10)), EnvConfig())
    assert report.vacuous_channels == ["ai"]
    assert report.completion_ai_pct == 100.0


def test_report_rows_follow_fixed_order():
    telemetry = {name: _make_telemetry() for name in ("ran_priority", "sac", "balanced")}
    report = assemble_report(telemetry, EnvConfig(), trace_hash="abc")
    assert [row.policy for row in report.rows] == ["sac", "balanced", "ran_priority"]
    assert report.row("balanced").steps == 10
    assert "ran_priority" in report.table


def test_report_rejects_unknown_or_missing_policies():
    with pytest.raises(ValueError):
        assemble_report({"greedy": _make_telemetry()}, EnvConfig(), trace_hash="abc")
    with pytest.raises(ValueError):
        assemble_report({}, EnvConfig(), trace_hash="abc")

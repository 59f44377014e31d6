"""Unit tests for the SAC agent and the learner that feeds it."""
import logging

import numpy as np
import pytest

from app.engine.forecaster import SpikeAwareLSTM
from app.engine.rng import RngStreams
from app.engine.sac import Batch, SacAgent, soft_target
from app.models.config import ForecasterConfig, SACConfig
from app.repository.checkpoints import CheckpointFormatError
from app.services.agent_service import AgentLearner, build_agent, load_agent, save_agent
from app.services.forecaster_service import save_forecaster

STATE_DIM = 6


def _make_agent(rng, policy_rng=None, **overrides) -> SacAgent:
    fields = {"hidden": 8, "batch": 4, "warmup_steps": 3, "buffer_capacity": 50}
    fields.update(overrides)
    return SacAgent(SACConfig(**fields), STATE_DIM, init_rng=rng, policy_rng=policy_rng)


def _make_batch(rng, size: int = 4) -> Batch:
    return Batch(
        states=rng.uniform(0.0, 1.0, size=(size, STATE_DIM)),
        actions=rng.uniform(-1.0, 1.0, size=(size, 2)),
        rewards=rng.normal(size=size),
        next_states=rng.uniform(0.0, 1.0, size=(size, STATE_DIM)),
        dones=np.zeros(size),
    )


# ── Critic target ────────────────────────────────────────────────────────────

def test_soft_target_without_entropy():
    y = soft_target(np.array([1.0]), np.array([0.0]), np.array([2.0]), np.array([-1.0]), 0.99, 0.2, False)
    assert y[0] == pytest.approx(2.98)


def test_soft_target_with_entropy():
    y = soft_target(np.array([1.0]), np.array([0.0]), np.array([2.0]), np.array([-1.0]), 0.99, 0.2, True)
    assert y[0] == pytest.approx(3.178)


def test_terminal_target_is_the_reward():
    y = soft_target(np.array([0.7]), np.array([1.0]), np.array([5.0]), np.array([-1.0]), 0.99, 0.2)
    assert y[0] == pytest.approx(0.7)


# ── Policy ───────────────────────────────────────────────────────────────────

def test_deterministic_action_needs_no_stream(rng):
    agent = _make_agent(rng)
    state = np.full(STATE_DIM, 0.5)
    first, second = agent.act(state), agent.act(state)
    np.testing.assert_array_equal(first, second)
    assert first.shape == (2,)
    assert np.all(np.abs(first) <= 1.0)


def test_stochastic_action_without_stream_raises(rng):
    with pytest.raises(ValueError):
        _make_agent(rng).act(np.zeros(STATE_DIM), stochastic=True)


def test_stochastic_actions_stay_in_range(rng):
    agent = _make_agent(rng, policy_rng=np.random.default_rng(0))
    actions = np.array([agent.act(rng.uniform(size=STATE_DIM), stochastic=True) for _ in range(50)])
    assert np.all(np.abs(actions) <= 1.0)
    assert np.unique(actions[:, 0]).size == 50


def test_stochastic_action_mean_is_the_squashed_policy_mean(rng):
    agent = _make_agent(rng, policy_rng=np.random.default_rng(4), log_std_max=-4.0)
    state = rng.uniform(size=STATE_DIM)
    actions = np.array([agent.act(state, stochastic=True) for _ in range(1000)])
    mean, _ = agent.distribution(state)
    np.testing.assert_allclose(actions.mean(axis=0), np.tanh(mean.data[0]), atol=5e-3)
    assert np.all(actions.std(axis=0) > 0.0)


def test_log_density_matches_change_of_variables(rng):
    agent = _make_agent(rng)
    states = rng.uniform(size=(3, STATE_DIM))
    noise = rng.standard_normal((3, 2))
    _, log_prob = agent.sample(states, noise=noise)
    mean, log_std = agent.distribution(states)
    u = mean.data + np.exp(log_std.data) * noise
    gaussian = -0.5 * noise ** 2 - 0.5 * np.log(2.0 * np.pi) - log_std.data
    expected = np.sum(gaussian - np.log(1.0 - np.tanh(u) ** 2), axis=1)
    np.testing.assert_allclose(log_prob.data, expected, rtol=1e-8)


# ── Updates ──────────────────────────────────────────────────────────────────

def test_update_returns_finite_losses_and_counts(rng):
    agent = _make_agent(rng, policy_rng=np.random.default_rng(1))
    stats = agent.update(_make_batch(rng))
    assert np.isfinite(stats.critic_loss) and np.isfinite(stats.actor_loss)
    assert agent.updates == 1


def test_hard_target_update_copies_critics(rng):
    agent = _make_agent(rng, policy_rng=np.random.default_rng(1), tau=1.0, critic_lr=1e-2)
    before = agent.networks["critic1"].state_dict()
    agent.update(_make_batch(rng))
    after = agent.networks["critic1"].state_dict()
    assert any(not np.array_equal(before[k], after[k]) for k in before)
    for name, values in agent.networks["target1"].state_dict().items():
        np.testing.assert_array_equal(values, after[name])


def test_targets_close_the_gap_geometrically_to_frozen_critics(rng):
    tau = 0.1
    agent = _make_agent(rng, policy_rng=np.random.default_rng(1), tau=tau, actor_lr=0.0, critic_lr=0.0)
    for _, tensor in agent.networks["target1"].items():
        tensor.data = tensor.data + 1.0
    critic = agent.networks["critic1"].state_dict()
    batch = _make_batch(rng)
    for k in range(1, 6):
        agent.update(batch)
        for name, values in agent.networks["target1"].state_dict().items():
            np.testing.assert_allclose(values - critic[name], (1.0 - tau) ** k, rtol=1e-9)


def test_zero_learning_rates_leave_networks_unchanged(rng):
    agent = _make_agent(rng, policy_rng=np.random.default_rng(1), actor_lr=0.0, critic_lr=0.0)
    before = agent.state_arrays()
    agent.update(_make_batch(rng))
    for name, values in agent.state_arrays().items():
        np.testing.assert_allclose(values, before[name], rtol=1e-12, atol=1e-15)


def test_state_arrays_round_trip(rng):
    agent = _make_agent(rng)
    clone = _make_agent(np.random.default_rng(99))
    clone.load_arrays(agent.state_arrays())
    state = rng.uniform(size=STATE_DIM)
    np.testing.assert_array_equal(agent.act(state), clone.act(state))


# ── Learner ──────────────────────────────────────────────────────────────────

def test_warmup_uses_uniform_actions_without_updates(rng):
    agent = _make_agent(rng, warmup_steps=3)
    learner = AgentLearner(agent, RngStreams(5))
    for _ in range(3):
        assert learner.warming_up
        action = learner.choose(np.zeros(STATE_DIM))
        assert np.all(np.abs(action) <= 1.0)
        assert learner.observe(np.zeros(STATE_DIM), action, 0.0, np.zeros(STATE_DIM), False) == []
    assert not learner.warming_up
    assert agent.updates == 0


def test_updates_start_once_warm_and_full_enough(rng):
    agent = build_agent(SACConfig(hidden=8, batch=4, warmup_steps=2, buffer_capacity=50, updates_per_step=2), STATE_DIM, RngStreams(3))
    learner = AgentLearner(agent, RngStreams(3))
    state = np.full(STATE_DIM, 0.2)
    counts = []
    for _ in range(6):
        stats = learner.observe(state, learner.choose(state), 1.0, state, False)
        counts.append(len(stats))
    assert counts == [0, 0, 0, 2, 2, 2]
    assert agent.updates == 6


def test_update_below_batch_warns_once(rng, caplog):
    learner = AgentLearner(_make_agent(rng, batch=10), RngStreams(0))
    with caplog.at_level(logging.WARNING, logger="agent"):
        assert learner.update() is None
        assert learner.update() is None
    assert sum("update_skipped" in r.getMessage() for r in caplog.records) == 1


def test_agent_checkpoint_round_trip(rng, tmp_path):
    streams = RngStreams(2)
    agent = build_agent(SACConfig(hidden=8), STATE_DIM, streams)
    agent.updates = 17
    loaded = load_agent(save_agent(agent, tmp_path / "agent.npz"), RngStreams(2))
    assert loaded.updates == 17
    assert loaded.state_dim == STATE_DIM
    state = rng.uniform(size=STATE_DIM)
    np.testing.assert_array_equal(agent.act(state), loaded.act(state))


def test_forecaster_checkpoint_is_not_an_agent(rng, tmp_path):
    model = SpikeAwareLSTM(ForecasterConfig(seq_len=2, hidden1=2, hidden2=2), rng=rng)
    with pytest.raises(CheckpointFormatError):
        load_agent(save_forecaster(model, tmp_path / "forecaster.npz"), RngStreams(0))

"""
Agent lifecycle: construction, online learning (warm-up, replay, updates)
and checkpoint persistence.
"""
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np

from app.engine.rng import RngStreams
from app.engine.sac import SacAgent, UpdateStats
from app.models.config import SACConfig
from app.repository.checkpoints import load_checkpoint, save_checkpoint
from app.repository.replay_buffer import ReplayBuffer
from app.structured_log import log_event

logger = logging.getLogger("agent")

CHECKPOINT_KIND = "agent"


def build_agent(config: SACConfig, state_dim: int, streams: RngStreams) -> SacAgent:
    return SacAgent(config, state_dim, init_rng=streams.get_stream("init"), policy_rng=streams.get_stream("policy"))


class AgentLearner:
    """
    Owns the replay buffer and drives updates. Single writer: one learner per agent.

    The first `warmup_steps` actions are uniform in [−1, 1]^2; after that actions
    are sampled from the agent and every stored transition triggers
    `updates_per_step` gradient updates.
    """

    def __init__(self, agent: SacAgent, streams: RngStreams):
        config = agent.config
        self.agent = agent
        self.config = config
        self.buffer = ReplayBuffer(config.buffer_capacity, agent.state_dim, config.action_dim)
        self.total_steps = 0
        self._warmup_rng = streams.get_stream("warmup")
        self._buffer_rng = streams.get_stream("buffer")
        self._warned_occupancy = False

    @property
    def warming_up(self) -> bool:
        return self.total_steps < self.config.warmup_steps

    def choose(self, state: np.ndarray) -> np.ndarray:
        if self.warming_up:
            return self._warmup_rng.uniform(-1.0, 1.0, size=self.config.action_dim)
        return self.agent.act(state, stochastic=True)

    def observe(self, state: np.ndarray, action: np.ndarray, reward: float, next_state: np.ndarray, done: bool) -> list[UpdateStats]:
        """Store the transition and run the due updates."""
        self.buffer.push(state, action, reward, next_state, done)
        self.total_steps += 1
        if self.warming_up:
            return []
        stats = []
        for _ in range(self.config.updates_per_step):
            result = self.update()
            if result is not None:
                stats.append(result)
        return stats

    def update(self) -> Optional[UpdateStats]:
        """One SAC update; a no-op with a warning while occupancy is below the batch size."""
        occupancy = len(self.buffer)
        if occupancy < self.config.batch:
            if not self._warned_occupancy:
                log_event(
                    logger,
                    "update_skipped",
                    level=logging.WARNING,
                    occupancy=occupancy,
                    batch=self.config.batch,
                )
                self._warned_occupancy = True
            return None
        return self.agent.update(self.buffer.sample(self.config.batch, self._buffer_rng))


def save_agent(agent: SacAgent, path: Union[str, Path]) -> Path:
    meta = {"config": agent.config.model_dump(mode="json"), "state_dim": agent.state_dim, "updates": agent.updates}
    return save_checkpoint(path, CHECKPOINT_KIND, agent.state_arrays(), meta)


def load_agent(path: Union[str, Path], streams: RngStreams) -> SacAgent:
    """
    Raises:
        ArtifactNotFoundError: If the file is missing.
        CheckpointFormatError: If it is not an agent checkpoint.
    """
    arrays, meta = load_checkpoint(path, CHECKPOINT_KIND)
    agent = build_agent(SACConfig.model_validate(meta["config"]), int(meta["state_dim"]), streams)
    agent.load_arrays(arrays)
    agent.updates = int(meta.get("updates", 0))
    log_event(logger, "checkpoint_loaded", path=str(path), updates=agent.updates)
    return agent

"""
Allocation policies behind one interface: the learned agent and two static splits.

A policy maps an observation to an action in [−1, 1]^2, which the environment
scales to a requested allocation change of at most v_max per service.
"""
from enum import Enum
from typing import NamedTuple, Optional, Protocol

import numpy as np

from app.engine.sac import SacAgent
from app.models.config import EnvConfig
from app.models.environment import OrchestratorState

Pair = tuple[float, float]

BALANCED_TARGET: Pair = (0.5, 0.5)
RAN_PRIORITY_TARGET: Pair = (0.7, 0.3)


class PolicyKind(str, Enum):
    SAC = "sac"
    BALANCED = "balanced"
    RAN_PRIORITY = "ran_priority"


# report row order
POLICY_ORDER = [PolicyKind.SAC, PolicyKind.BALANCED, PolicyKind.RAN_PRIORITY]


class StaticDecision(NamedTuple):
    target: Pair
    action: np.ndarray


class Policy(Protocol):
    kind: PolicyKind
    learns: bool

    def act(self, state: OrchestratorState) -> np.ndarray: ...

    def initial_allocation(self, config: EnvConfig) -> Pair: ...


def _move_toward(target: Pair, state: OrchestratorState, v_max: float) -> StaticDecision:
    delta = np.array([target[0] - state.r_prev_ran, target[1] - state.r_prev_ai])
    return StaticDecision(target=target, action=np.clip(delta / v_max, -1.0, 1.0))


def balanced_action(state: OrchestratorState, v_max: float) -> StaticDecision:
    """
    Half of capacity to each service, whatever the demand.

    Example:
        any state → target (0.5, 0.5); steady MIG grant (10, 10) of 21
    """
    return _move_toward(BALANCED_TARGET, state, v_max)


def ran_priority_action(state: OrchestratorState, v_max: float) -> StaticDecision:
    """
    70% of capacity to RAN, 30% to AI.

    Example:
        any state → target (0.7, 0.3); steady MIG grant (14, 6) of 21
    """
    return _move_toward(RAN_PRIORITY_TARGET, state, v_max)


class StaticPolicy:
    learns = False

    def __init__(self, kind: PolicyKind, v_max: float):
        if kind == PolicyKind.SAC:
            raise ValueError("the learned policy is not a static split")
        self.kind = kind
        self.v_max = v_max
        self._decide = balanced_action if kind == PolicyKind.BALANCED else ran_priority_action
        self.target = BALANCED_TARGET if kind == PolicyKind.BALANCED else RAN_PRIORITY_TARGET

    def act(self, state: OrchestratorState) -> np.ndarray:
        return self._decide(state, self.v_max).action

    def initial_allocation(self, config: EnvConfig) -> Pair:
        # static splits are instantaneous: start at the target
        return self.target


class SacPolicy:
    kind = PolicyKind.SAC

    def __init__(self, agent: SacAgent, stochastic: bool = False, learns: bool = False):
        self.agent = agent
        self.stochastic = stochastic
        self.learns = learns

    def act(self, state: OrchestratorState) -> np.ndarray:
        return self.agent.act(state.to_vector(), stochastic=self.stochastic)

    def initial_allocation(self, config: EnvConfig) -> Pair:
        return config.initial_allocation


def make_policy(kind: PolicyKind | str, config: EnvConfig, agent: Optional[SacAgent] = None) -> Policy:
    kind = PolicyKind(kind)
    if kind == PolicyKind.SAC:
        if agent is None:
            raise ValueError("the sac policy needs a trained agent")
        return SacPolicy(agent)
    return StaticPolicy(kind, config.v_max)

"""
Soft Actor-Critic over the (Δr_RAN, Δr_AI) action.

Actor: state → 3-layer ReLU MLP → (mean, log-std) per action dimension,
tanh-squashed Gaussian. Critics: two 3-layer MLPs on state ⊕ action with
Polyak-averaged target copies. Temperature is fixed.
"""
import math
from typing import NamedTuple, Optional

import numpy as np

from app.engine import tensor as T
from app.engine.layers import dense_forward
from app.engine.optim import AdamState, ParamStore, adam_step
from app.models.config import SACConfig

LOG_2PI = math.log(2.0 * math.pi)
LOG_2 = math.log(2.0)
NETWORKS = ("actor", "critic1", "critic2", "target1", "target2")


class Batch(NamedTuple):
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray


class UpdateStats(NamedTuple):
    critic_loss: float
    actor_loss: float


class Mlp:
    """in → hidden → hidden → out with ReLU between layers."""

    def __init__(self, params: ParamStore, sizes: tuple[int, int, int, int], rng: np.random.Generator, final_scale: float = 1.0):
        self.params = params
        for layer, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:]), start=1):
            bound = 1.0 / math.sqrt(fan_in)
            scale = final_scale if layer == 3 else 1.0
            params.add(f"l{layer}.W", scale * rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            params.add(f"l{layer}.b", scale * rng.uniform(-bound, bound, size=(fan_out,)))

    def __call__(self, x: T.Tensor) -> T.Tensor:
        p = self.params
        x = T.relu(dense_forward(x, p["l1.W"], p["l1.b"]))
        x = T.relu(dense_forward(x, p["l2.W"], p["l2.b"]))
        return dense_forward(x, p["l3.W"], p["l3.b"])


def soft_target(
    rewards: np.ndarray,
    dones: np.ndarray,
    min_next_q: np.ndarray,
    next_log_prob: np.ndarray,
    gamma: float,
    alpha: float,
    entropy_in_target: bool = True,
) -> np.ndarray:
    """
    Critic regression target y = R' + γ·(1 − done)·(min_j Q'_j(s', a') − α·log π(a'|s')).

    The entropy term is omitted when entropy_in_target is off.

    Example:
        R' = 1, γ = 0.99, min Q' = 2, done = 0, entropy off → 2.98
        same with α = 0.2, log π = −1 → 1 + 0.99·2.2 = 3.178
    """
    soft_value = min_next_q - alpha * next_log_prob if entropy_in_target else min_next_q
    return rewards + gamma * (1.0 - dones) * soft_value


class SacAgent:
    def __init__(self, config: SACConfig, state_dim: int, init_rng: np.random.Generator, policy_rng: Optional[np.random.Generator] = None):
        self.config = config
        self.state_dim = state_dim
        self.policy_rng = policy_rng
        a, h = config.action_dim, config.hidden
        self.networks: dict[str, ParamStore] = {name: ParamStore() for name in NETWORKS}
        self.actor = Mlp(self.networks["actor"], (state_dim, h, h, 2 * a), init_rng, config.final_layer_scale)
        self.critic1 = Mlp(self.networks["critic1"], (state_dim + a, h, h, 1), init_rng)
        self.critic2 = Mlp(self.networks["critic2"], (state_dim + a, h, h, 1), init_rng)
        self.target1 = Mlp(self.networks["target1"], (state_dim + a, h, h, 1), init_rng)
        self.target2 = Mlp(self.networks["target2"], (state_dim + a, h, h, 1), init_rng)
        self.networks["target1"].copy_from(self.networks["critic1"])
        self.networks["target2"].copy_from(self.networks["critic2"])
        self.optimizers = {
            name: AdamState.for_params(self.networks[name]) for name in ("actor", "critic1", "critic2")
        }
        self.updates = 0

    # ── Policy ──────────────────────────────────────────────────────────────

    def distribution(self, states: np.ndarray) -> tuple[T.Tensor, T.Tensor]:
        """(mean, clamped log-std), each (batch, action_dim)."""
        out = self.actor(T.Tensor(np.atleast_2d(states)))
        a = self.config.action_dim
        mean = T.take(out, (slice(None), slice(0, a)))
        log_std = T.clip(T.take(out, (slice(None), slice(a, 2 * a))), self.config.log_std_min, self.config.log_std_max)
        return mean, log_std

    def sample(
        self,
        states: np.ndarray,
        noise: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[T.Tensor, T.Tensor]:
        """
        Reparameterized squashed-Gaussian sample a = tanh(μ + σ·ε) and its log-density.

        log π(a|s) = Σ_i [−½ε_i² − log σ_i − ½·log 2π − 2(log 2 − u_i − softplus(−2u_i))]

        Pass `noise` to freeze ε; otherwise it is drawn from `rng` (or the policy stream).
        """
        mean, log_std = self.distribution(states)
        if noise is None:
            rng = rng or self.policy_rng
            if rng is None:
                raise ValueError("stochastic sampling needs a random stream")
            noise = rng.standard_normal(mean.shape)
        eps = np.asarray(noise, dtype=np.float64)
        u = T.add(mean, T.mul(T.exp(log_std), eps))
        action = T.tanh(u)
        tanh_correction = T.mul(T.sub(T.sub(LOG_2, u), T.softplus(T.mul(u, -2.0))), 2.0)
        per_dim = T.sub(T.sub(-0.5 * eps * eps - 0.5 * LOG_2PI, log_std), tanh_correction)
        return action, T.sum_(per_dim, axis=1)

    def act(self, state: np.ndarray, stochastic: bool = False) -> np.ndarray:
        """
        Action in [−1, 1]^2 for a single state vector.

        Deterministic mode returns tanh(mean) and reads no random stream.
        """
        if stochastic:
            action, _ = self.sample(state)
            return action.data[0].copy()
        mean, _ = self.distribution(state)
        return np.tanh(mean.data[0])

    # ── Critics ─────────────────────────────────────────────────────────────

    @staticmethod
    def q_value(critic: Mlp, states: np.ndarray, actions) -> T.Tensor:
        joint = T.concat([T.Tensor(np.atleast_2d(states)), actions], axis=1)
        return T.take(critic(joint), (slice(None), 0))

    # ── Learning ────────────────────────────────────────────────────────────

    def update(self, batch: Batch, rng: Optional[np.random.Generator] = None) -> UpdateStats:
        """
        One critic step, one actor step, then soft target updates.

        Raises:
            TensorError: If a forward or backward value stops being finite.
        """
        cfg = self.config
        rng = rng or self.policy_rng

        next_actions, next_log_prob = self.sample(batch.next_states, rng=rng)
        min_next_q = np.minimum(
            self.q_value(self.target1, batch.next_states, next_actions).data,
            self.q_value(self.target2, batch.next_states, next_actions).data,
        )
        y = soft_target(
            batch.rewards, batch.dones, min_next_q, next_log_prob.data, cfg.gamma, cfg.alpha, cfg.entropy_in_target
        )

        actions = T.Tensor(batch.actions)
        with T.Tape() as tape:
            q1 = self.q_value(self.critic1, batch.states, actions)
            q2 = self.q_value(self.critic2, batch.states, actions)
            critic_loss = T.add(T.mean(T.square(T.sub(q1, y))), T.mean(T.square(T.sub(q2, y))))
        tape.backward(critic_loss)
        for name in ("critic1", "critic2"):
            adam_step(self.networks[name], self.optimizers[name], cfg.critic_lr, cfg.adam_betas, cfg.adam_eps)

        with T.Tape() as tape:
            actor_loss = self.actor_loss(batch.states, rng=rng)
        tape.backward(actor_loss)
        adam_step(self.networks["actor"], self.optimizers["actor"], cfg.actor_lr, cfg.adam_betas, cfg.adam_eps)
        self.networks["critic1"].zero_grad()
        self.networks["critic2"].zero_grad()

        self.networks["target1"].copy_from(self.networks["critic1"], cfg.tau)
        self.networks["target2"].copy_from(self.networks["critic2"], cfg.tau)
        self.updates += 1
        return UpdateStats(critic_loss=critic_loss.item(), actor_loss=actor_loss.item())

    def actor_loss(self, states: np.ndarray, noise: Optional[np.ndarray] = None, rng: Optional[np.random.Generator] = None) -> T.Tensor:
        """mean(α·log π(a|s) − min_j Q_j(s, a)) with a reparameterized from the current actor."""
        actions, log_prob = self.sample(states, noise=noise, rng=rng)
        q = T.minimum(self.q_value(self.critic1, states, actions), self.q_value(self.critic2, states, actions))
        return T.mean(T.sub(T.mul(log_prob, self.config.alpha), q))

    # ── Persistence ─────────────────────────────────────────────────────────

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {
            f"{net}.{name}": values
            for net, store in self.networks.items()
            for name, values in store.state_dict().items()
        }

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for net, store in self.networks.items():
            store.load_state_dict({name[len(net) + 1:]: v for name, v in arrays.items() if name.startswith(net + ".")})

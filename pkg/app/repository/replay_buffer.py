"""
Bounded replay buffer with thread-safe operations.

Fixed-size numpy ring; the oldest transition is overwritten once the buffer
is full. No learning logic, only storage and sampling.
"""
import threading

import numpy as np

from app.engine.sac import Batch


class InvalidTransitionError(Exception):
    """Raised when a transition holds NaN/Inf or has the wrong shape."""

    def __init__(self, message: str, details: dict | None = None):
        self.code = "INVALID_TRANSITION"
        self.details = details or {}
        super().__init__(message)


class ReplayBuffer:
    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self._lock = threading.Lock()
        self.capacity = capacity
        self._states = np.zeros((capacity, state_dim))
        self._actions = np.zeros((capacity, action_dim))
        self._rewards = np.zeros(capacity)
        self._next_states = np.zeros((capacity, state_dim))
        self._dones = np.zeros(capacity)
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        with self._lock:
            return self._size

    def push(self, state: np.ndarray, action: np.ndarray, reward: float, next_state: np.ndarray, done: bool) -> None:
        """
        Append one transition, evicting the oldest when full.

        Raises:
            InvalidTransitionError: On a shape mismatch or a non-finite field.
        """
        fields = {
            "state": (np.asarray(state, dtype=np.float64), self._states.shape[1:]),
            "action": (np.asarray(action, dtype=np.float64), self._actions.shape[1:]),
            "reward": (np.asarray(reward, dtype=np.float64), ()),
            "next_state": (np.asarray(next_state, dtype=np.float64), self._next_states.shape[1:]),
        }
        for name, (values, shape) in fields.items():
            if values.shape != shape:
                raise InvalidTransitionError(
                    f"{name} has shape {values.shape}, expected {shape}", {"field": name}
                )
            if not np.all(np.isfinite(values)):
                raise InvalidTransitionError(f"{name} is not finite", {"field": name, "value": values.tolist()})

        with self._lock:
            slot = self._cursor
            self._states[slot] = fields["state"][0]
            self._actions[slot] = fields["action"][0]
            self._rewards[slot] = float(fields["reward"][0])
            self._next_states[slot] = fields["next_state"][0]
            self._dones[slot] = 1.0 if done else 0.0
            self._cursor = (slot + 1) % self.capacity
            self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """
        Uniform mini-batch without replacement.

        Raises:
            ValueError: If batch_size exceeds the occupancy.
        """
        with self._lock:
            if batch_size > self._size:
                raise ValueError(f"batch of {batch_size} requested from {self._size} transitions")
            idx = rng.choice(self._size, size=batch_size, replace=False)
            return Batch(
                states=self._states[idx].copy(),
                actions=self._actions[idx].copy(),
                rewards=self._rewards[idx].copy(),
                next_states=self._next_states[idx].copy(),
                dones=self._dones[idx].copy(),
            )

    def snapshot(self) -> Batch:
        """Every stored transition, oldest first."""
        with self._lock:
            if self._size < self.capacity:
                order = np.arange(self._size)
            else:
                order = (np.arange(self.capacity) + self._cursor) % self.capacity
            return Batch(
                states=self._states[order].copy(),
                actions=self._actions[order].copy(),
                rewards=self._rewards[order].copy(),
                next_states=self._next_states[order].copy(),
                dones=self._dones[order].copy(),
            )

"""
Parameter containers and the Adam optimizer.
"""
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from app.engine.tensor import Tensor, TensorError


class ParamStore:
    """Ordered, named gradient-leaf tensors owned by one model."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, values: np.ndarray) -> Tensor:
        if name in self._params:
            raise TensorError(f"parameter '{name}' already registered")
        tensor = Tensor(values, requires_grad=True, name=name)
        self._params[name] = tensor
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> list[tuple[str, Tensor]]:
        return list(self._params.items())

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: tensor.data.copy() for name, tensor in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """
        Replace parameter values in place.

        Raises:
            TensorError: If names differ or a shape disagrees.
        """
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise TensorError(
                f"state mismatch: missing {sorted(missing)}, unexpected {sorted(extra)}"
            )
        for name, tensor in self._params.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != tensor.shape:
                raise TensorError(f"'{name}': stored shape {values.shape}, expected {tensor.shape}")
            if not np.all(np.isfinite(values)):
                raise TensorError(f"'{name}': stored values are not finite")
            tensor.data = values.copy()
            tensor.zero_grad()

    def copy_from(self, other: "ParamStore", tau: float = 1.0) -> None:
        """Polyak update: p ← τ·other + (1−τ)·p. τ=1 is a hard copy."""
        for name, tensor in self._params.items():
            source = other[name].data
            if tau == 1.0:
                tensor.data = source.copy()
            else:
                tensor.data = tau * source + (1.0 - tau) * tensor.data

    def grad_norm(self) -> float:
        return float(np.sqrt(sum(float(np.sum(t.grad * t.grad)) for t in self._params.values())))


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: ParamStore) -> "AdamState":
        return cls(
            first_moment={name: np.zeros_like(t.data) for name, t in params.items()},
            second_moment={name: np.zeros_like(t.data) for name, t in params.items()},
        )


def adam_step(
    params: ParamStore,
    state: AdamState,
    lr: float,
    betas: tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> None:
    """
    Apply one bias-corrected Adam update to every parameter, then zero the gradients.

    Example:
        first step with gradient g → update ≈ −lr·sign(g)
    """
    beta1, beta2 = betas
    state.step += 1
    correction1 = 1.0 - beta1 ** state.step
    correction2 = 1.0 - beta2 ** state.step
    for name, tensor in params.items():
        grad = tensor.grad
        m = beta1 * state.first_moment[name] + (1.0 - beta1) * grad
        v = beta2 * state.second_moment[name] + (1.0 - beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        tensor.data = tensor.data - lr * (m / correction1) / (np.sqrt(v / correction2) + eps)
    params.zero_grad()

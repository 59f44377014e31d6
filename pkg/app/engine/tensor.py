"""
Dense 64-bit tensors with a recorded tape for reverse-mode gradients.

While a Tape is active on the current thread, every op appends one record
(inputs, outputs, vector-Jacobian closure). Tape.backward replays the records
in reverse and accumulates gradients into leaf tensors that require them.
Outside a tape, ops only compute values.
"""
from __future__ import annotations

import threading
from typing import Callable, NamedTuple, Optional, Sequence, Union

import numpy as np

DTYPE = np.float64

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]
VJP = Callable[[tuple[np.ndarray, ...]], tuple[Optional[np.ndarray], ...]]

_local = threading.local()


class TensorError(Exception):
    """Raised on shape mismatches, non-finite values, or an invalid backward call."""
    pass


class Tensor:
    """A shaped block of finite float64 values, optionally a gradient leaf."""

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, values, requires_grad: bool = False, name: Optional[str] = None):
        data = np.array(values, dtype=DTYPE)
        if not np.all(np.isfinite(data)):
            label = f" '{name}'" if name else ""
            raise TensorError(f"Tensor{label} contains NaN or Inf values")
        self.data = data
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(data) if requires_grad else None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise TensorError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def __add__(self, other: ArrayLike) -> "Tensor":
        return add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        return add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        return sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        return sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        return mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        return mul(other, self)

    def __truediv__(self, other: ArrayLike) -> "Tensor":
        return div(self, other)

    def __neg__(self) -> "Tensor":
        return mul(self, -1.0)


class _Record(NamedTuple):
    inputs: tuple[Tensor, ...]
    outputs: tuple[Tensor, ...]
    vjp: VJP


class Tape:
    """Records ops executed inside `with Tape() as tape:` on this thread."""

    def __init__(self):
        self._records: list[_Record] = []
        self._previous: Optional[Tape] = None

    def __enter__(self) -> "Tape":
        self._previous = getattr(_local, "tape", None)
        _local.tape = self
        return self

    def __exit__(self, *exc) -> None:
        _local.tape = self._previous
        self._previous = None

    def __len__(self) -> int:
        return len(self._records)

    def record(self, inputs: tuple[Tensor, ...], outputs: tuple[Tensor, ...], vjp: VJP) -> None:
        self._records.append(_Record(inputs, outputs, vjp))

    def backward(self, loss: Tensor) -> None:
        """
        Populate `.grad` of every gradient leaf reachable from `loss`.

        Gradients accumulate: callers zero them between optimization steps.

        Raises:
            TensorError: If `loss` is not a single value or was not produced on this tape.
        """
        if loss.size != 1:
            raise TensorError(f"backward needs a scalar loss, got shape {loss.shape}")
        if not any(loss is out for rec in self._records for out in rec.outputs):
            raise TensorError("loss was not recorded on this tape")

        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
        leaves: dict[int, Tensor] = {}
        for rec in reversed(self._records):
            out_grads = [grads.get(id(out)) for out in rec.outputs]
            if all(g is None for g in out_grads):
                continue
            out_grads = tuple(
                g if g is not None else np.zeros_like(out.data)
                for g, out in zip(out_grads, rec.outputs)
            )
            in_grads = rec.vjp(out_grads)
            for tensor, g in zip(rec.inputs, in_grads):
                if g is None:
                    continue
                key = id(tensor)
                grads[key] = grads[key] + g if key in grads else g
                if tensor.requires_grad:
                    leaves[key] = tensor

        for key, tensor in leaves.items():
            tensor.grad = tensor.grad + grads[key]


def current_tape() -> Optional[Tape]:
    return getattr(_local, "tape", None)


def as_tensor(value: ArrayLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def emit(inputs: tuple[Tensor, ...], outputs: tuple[np.ndarray, ...], vjp: VJP) -> tuple[Tensor, ...]:
    """Wrap raw op outputs as tensors and record the op on the active tape."""
    wrapped = tuple(Tensor(out) for out in outputs)
    tape = current_tape()
    if tape is not None:
        tape.record(inputs, wrapped, vjp)
    return wrapped


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise TensorError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from exc


# ── Elementwise ─────────────────────────────────────────────────────────────

def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def vjp(g):
        return _unbroadcast(g[0], a.shape), _unbroadcast(g[0], b.shape)

    return emit((a, b), (a.data + b.data,), vjp)[0]


def sub(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")

    def vjp(g):
        return _unbroadcast(g[0], a.shape), _unbroadcast(-g[0], b.shape)

    return emit((a, b), (a.data - b.data,), vjp)[0]


def mul(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def vjp(g):
        return _unbroadcast(g[0] * b.data, a.shape), _unbroadcast(g[0] * a.data, b.shape)

    return emit((a, b), (a.data * b.data,), vjp)[0]


def div(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    if np.any(b.data == 0.0):
        raise TensorError("div: division by zero")

    def vjp(g):
        return (
            _unbroadcast(g[0] / b.data, a.shape),
            _unbroadcast(-g[0] * a.data / (b.data * b.data), b.shape),
        )

    return emit((a, b), (a.data / b.data,), vjp)[0]


def square(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    return emit((x,), (x.data * x.data,), lambda g: (2.0 * x.data * g[0],))[0]


def tanh(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return emit((x,), (y,), lambda g: (g[0] * (1.0 - y * y),))[0]


def sigmoid(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    return emit((x,), (y,), lambda g: (g[0] * y * (1.0 - y),))[0]


def relu(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0.0
    return emit((x,), (np.where(mask, x.data, 0.0),), lambda g: (g[0] * mask,))[0]


def exp(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.exp(x.data)
    return emit((x,), (y,), lambda g: (g[0] * y,))[0]


def log(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    if np.any(x.data <= 0.0):
        raise TensorError("log: non-positive input")
    return emit((x,), (np.log(x.data),), lambda g: (g[0] / x.data,))[0]


def softplus(x: ArrayLike) -> Tensor:
    x = as_tensor(x)
    y = np.logaddexp(0.0, x.data)
    return emit((x,), (y,), lambda g: (g[0] * _sigmoid(x.data),))[0]


def clip(x: ArrayLike, low: float, high: float) -> Tensor:
    """Clamp values; the gradient passes only where the input was inside [low, high]."""
    x = as_tensor(x)
    inside = (x.data >= low) & (x.data <= high)
    return emit((x,), (np.clip(x.data, low, high),), lambda g: (g[0] * inside,))[0]


def minimum(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Elementwise minimum; ties route the gradient to `a`."""
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "minimum")
    pick_a = a.data <= b.data

    def vjp(g):
        return _unbroadcast(g[0] * pick_a, a.shape), _unbroadcast(g[0] * ~pick_a, b.shape)

    return emit((a, b), (np.minimum(a.data, b.data),), vjp)[0]


# ── Reductions and structure ────────────────────────────────────────────────

def sum_(x: ArrayLike, axis: Optional[int] = None) -> Tensor:
    x = as_tensor(x)
    y = x.data.sum(axis=axis)

    def vjp(g):
        grad = g[0] if axis is None else np.expand_dims(g[0], axis)
        return (np.broadcast_to(grad, x.shape).copy(),)

    return emit((x,), (y,), vjp)[0]


def mean(x: ArrayLike, axis: Optional[int] = None) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return mul(sum_(x, axis=axis), 1.0 / count)


def concat(tensors: Sequence[ArrayLike], axis: int = -1) -> Tensor:
    parts = tuple(as_tensor(t) for t in tensors)
    try:
        y = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as exc:
        raise TensorError(f"concat: incompatible shapes {[p.shape for p in parts]}") from exc
    bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]

    def vjp(g):
        return tuple(np.split(g[0], bounds, axis=axis))

    return emit(parts, (y,), vjp)[0]


def take(x: ArrayLike, index) -> Tensor:
    """Basic (slice / integer) indexing with a scatter-back gradient."""
    x = as_tensor(x)
    y = x.data[index]

    def vjp(g):
        grad = np.zeros_like(x.data)
        grad[index] = g[0]
        return (grad,)

    return emit((x,), (np.array(y, dtype=DTYPE),), vjp)[0]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out

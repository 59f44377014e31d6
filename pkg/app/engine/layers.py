"""
Network building blocks on top of the tape: dense, fused LSTM cell, layer
normalization and dropout.

Inputs may be a single vector (features,) or a batch (batch, features).
"""
from typing import Optional

import numpy as np

from app.engine.tensor import Tensor, TensorError, as_tensor, emit, mul
from app.models.config import ConfigError


def dense_forward(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """
    Affine map y = W·x + b, applied row-wise for batched x.

    Args:
        x: (in,) or (batch, in).
        W: (out, in).
        b: (out,).

    Returns:
        (out,) or (batch, out).

    Raises:
        TensorError: If the shapes do not conform.

    Example:
        W = identity(2), b = 0, x = (3, 4) → (3, 4)
    """
    x, W, b = as_tensor(x), as_tensor(W), as_tensor(b)
    if W.data.ndim != 2 or b.shape != (W.shape[0],) or x.shape[-1] != W.shape[1]:
        raise TensorError(f"dense: x {x.shape}, W {W.shape}, b {b.shape} do not conform")
    x2 = np.atleast_2d(x.data)
    y = x2 @ W.data.T + b.data

    def vjp(g):
        g2 = np.atleast_2d(g[0])
        return (
            (g2 @ W.data).reshape(x.shape),
            g2.T @ x2,
            g2.sum(axis=0),
        )

    return emit((x, W, b), (y.reshape(x.shape[:-1] + (W.shape[0],)),), vjp)[0]


def lstm_cell_step(
    x_t: Tensor,
    h_prev: Tensor,
    c_prev: Tensor,
    W_ih: Tensor,
    W_hh: Tensor,
    b: Tensor,
) -> tuple[Tensor, Tensor]:
    """
    One gated recurrent step, recorded as a single fused op.

    Gate rows of W_ih (4H×in), W_hh (4H×H) and b (4H) are ordered input,
    forget, candidate, output:

        c = f⊙c_prev + i⊙g,  h = o⊙tanh(c)

    Returns:
        (h, c) with the shape of h_prev.

    Raises:
        TensorError: If hidden sizes disagree with the parameters.
    """
    x_t, h_prev, c_prev = as_tensor(x_t), as_tensor(h_prev), as_tensor(c_prev)
    hidden = h_prev.shape[-1]
    if (
        W_hh.shape != (4 * hidden, hidden)
        or W_ih.shape != (4 * hidden, x_t.shape[-1])
        or b.shape != (4 * hidden,)
        or c_prev.shape != h_prev.shape
    ):
        raise TensorError(
            f"lstm: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape}, "
            f"W_ih {W_ih.shape}, W_hh {W_hh.shape}, b {b.shape} do not conform"
        )

    x2, h2, c2 = np.atleast_2d(x_t.data), np.atleast_2d(h_prev.data), np.atleast_2d(c_prev.data)
    z = x2 @ W_ih.data.T + h2 @ W_hh.data.T + b.data
    i = _sigmoid(z[:, :hidden])
    f = _sigmoid(z[:, hidden:2 * hidden])
    g = np.tanh(z[:, 2 * hidden:3 * hidden])
    o = _sigmoid(z[:, 3 * hidden:])
    c = f * c2 + i * g
    tc = np.tanh(c)
    h = o * tc

    def vjp(grads):
        gh, gc = (np.atleast_2d(v) for v in grads)
        dc = gc + gh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [
                dc * g * i * (1.0 - i),
                dc * c2 * f * (1.0 - f),
                dc * i * (1.0 - g * g),
                gh * tc * o * (1.0 - o),
            ],
            axis=1,
        )
        return (
            (dz @ W_ih.data).reshape(x_t.shape),
            (dz @ W_hh.data).reshape(h_prev.shape),
            (dc * f).reshape(c_prev.shape),
            dz.T @ x2,
            dz.T @ h2,
            dz.sum(axis=0),
        )

    h_out, c_out = emit(
        (x_t, h_prev, c_prev, W_ih, W_hh, b),
        (h.reshape(h_prev.shape), c.reshape(c_prev.shape)),
        vjp,
    )
    return h_out, c_out


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-8) -> Tensor:
    """
    Normalize over the last axis to zero mean and unit variance, then scale and shift.

    A constant row normalizes to zeros before the affine step.

    Example:
        x = (1, -1), gain = 1, bias = 0 → (1, -1)
    """
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    width = x.shape[-1] if x.data.ndim else 0
    if width == 0:
        raise TensorError("layer_norm: empty feature axis")
    if gain.shape != (width,) or bias.shape != (width,):
        raise TensorError(f"layer_norm: gain {gain.shape} / bias {bias.shape} vs features {width}")

    centered = x.data - x.data.mean(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt((centered * centered).mean(axis=-1, keepdims=True) + eps)
    xhat = centered * inv_std
    y = gain.data * xhat + bias.data

    def vjp(g):
        dxhat = g[0] * gain.data
        dx = inv_std * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        batch_axes = tuple(range(x.data.ndim - 1))
        return dx, (g[0] * xhat).sum(axis=batch_axes), g[0].sum(axis=batch_axes)

    return emit((x, gain, bias), (y,), vjp)[0]


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """
    Inverted dropout: zero each element with probability `rate`, scale survivors by 1/(1−rate).

    Returns `x` itself when not training or when rate is 0.

    Raises:
        ConfigError: If rate is outside [0, 1).
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode needs a random stream")
    keep = rng.random(x.shape) >= rate
    return mul(x, Tensor(keep / (1.0 - rate)))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))

"""
SpikeAwareLSTM: a two-layer recurrent backbone with a regression head (next
standardized value) and a spike head (probability that the next value is a spike).

    window → LSTM(h1) → LayerNorm → Dropout → LSTM(h2) → last hidden
           → dense → r̂            (unbounded, standardized units)
           → dense → sigmoid → ŝ   (0, 1)
"""
from typing import Optional

import numpy as np

from app.engine import tensor as T
from app.engine.layers import dense_forward, dropout, layer_norm, lstm_cell_step
from app.engine.optim import ParamStore
from app.models.config import ForecasterConfig
from app.models.forecast import ForecastBundle
from app.models.trace import Scaler

BCE_CLIP = 1e-7


class SpikeAwareLSTM:
    """Model parameters plus the training-split statistics needed to use them on raw demand."""

    def __init__(
        self,
        config: ForecasterConfig,
        rng: Optional[np.random.Generator] = None,
        zero_init: bool = False,
    ):
        self.config = config
        self.params = ParamStore()
        self.scaler = Scaler(mean=0.0, std=1.0)
        self.spike_threshold: Optional[float] = None
        if not zero_init and rng is None:
            raise ValueError("random initialization needs a random stream")
        self._build(rng, zero_init)

    @property
    def seq_len(self) -> int:
        return self.config.seq_len

    def _build(self, rng: Optional[np.random.Generator], zero_init: bool) -> None:
        h1, h2 = self.config.hidden1, self.config.hidden2

        def uniform(shape, fan):
            if zero_init:
                return np.zeros(shape)
            bound = 1.0 / np.sqrt(fan)
            return rng.uniform(-bound, bound, size=shape)

        def lstm_bias(hidden):
            bias = uniform((4 * hidden,), hidden)
            if not zero_init:
                bias[hidden:2 * hidden] = 1.0
            return bias

        p = self.params
        p.add("lstm1.W_ih", uniform((4 * h1, 1), h1))
        p.add("lstm1.W_hh", uniform((4 * h1, h1), h1))
        p.add("lstm1.b", lstm_bias(h1))
        p.add("ln1.gain", np.zeros(h1) if zero_init else np.ones(h1))
        p.add("ln1.bias", np.zeros(h1))
        p.add("lstm2.W_ih", uniform((4 * h2, h1), h2))
        p.add("lstm2.W_hh", uniform((4 * h2, h2), h2))
        p.add("lstm2.b", lstm_bias(h2))
        p.add("reg.W", uniform((1, h2), h2))
        p.add("reg.b", uniform((1,), h2))
        p.add("spike.W", uniform((1, h2), h2))
        p.add("spike.b", uniform((1,), h2))

    def forward(
        self,
        windows: np.ndarray,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> tuple[T.Tensor, T.Tensor]:
        """
        Run a batch of standardized windows through the network.

        Args:
            windows: (batch, seq_len) or (seq_len,) standardized values.
            training: Enables dropout.
            rng: Dropout stream, required when training with a nonzero rate.

        Returns:
            (r_hat, spike_prob), each of shape (batch,).

        Raises:
            ValueError: If the window length differs from seq_len.
        """
        windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
        if windows.shape[1] != self.seq_len:
            raise ValueError(f"window length {windows.shape[1]} != seq_len {self.seq_len}")
        batch = windows.shape[0]
        p = self.params
        h1 = c1 = T.Tensor(np.zeros((batch, self.config.hidden1)))
        h2 = c2 = T.Tensor(np.zeros((batch, self.config.hidden2)))

        for step in range(self.seq_len):
            x_t = T.Tensor(windows[:, step:step + 1])
            h1, c1 = lstm_cell_step(x_t, h1, c1, p["lstm1.W_ih"], p["lstm1.W_hh"], p["lstm1.b"])
            z = layer_norm(h1, p["ln1.gain"], p["ln1.bias"], eps=self.config.layer_norm_eps)
            z = dropout(z, self.config.dropout, training, rng)
            h2, c2 = lstm_cell_step(z, h2, c2, p["lstm2.W_ih"], p["lstm2.W_hh"], p["lstm2.b"])

        r_hat = T.take(dense_forward(h2, p["reg.W"], p["reg.b"]), (slice(None), 0))
        spike_prob = T.take(T.sigmoid(dense_forward(h2, p["spike.W"], p["spike.b"])), (slice(None), 0))
        return r_hat, spike_prob

    def predict(self, windows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Inference-mode forward returning plain arrays."""
        r_hat, spike_prob = self.forward(windows, training=False)
        return r_hat.data, spike_prob.data


def composite_loss(
    r_hat: T.Tensor,
    r_true: np.ndarray,
    spike_prob: T.Tensor,
    s_true: np.ndarray,
    lambda_detect: float,
) -> T.Tensor:
    """
    MSE on the regression head plus λ·BCE on the spike head.

        L = mean((r − r̂)²) − λ·mean(s·log ŝ + (1 − s)·log(1 − ŝ))

    ŝ is clipped to [1e-7, 1 − 1e-7]. The BCE term is dropped entirely when λ = 0.

    Example:
        r̂ = r, s = 1, ŝ = 0.5, λ = 1 → L = ln 2
    """
    loss = T.mean(T.square(T.sub(r_hat, np.asarray(r_true, dtype=np.float64))))
    if lambda_detect == 0.0:
        return loss
    s = T.Tensor(np.asarray(s_true, dtype=np.float64))
    p = T.clip(spike_prob, BCE_CLIP, 1.0 - BCE_CLIP)
    log_likelihood = T.add(T.mul(s, T.log(p)), T.mul(T.sub(1.0, s), T.log(T.sub(1.0, p))))
    return T.add(loss, T.mul(T.mean(log_likelihood), -lambda_detect))


def rollout(model: SpikeAwareLSTM, windows: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Recursive multi-step forecast for a batch of standardized windows.

    Each prediction is appended to its window for the next step.

    Returns:
        (standardized predictions (batch, horizon), first-step spike probability (batch,)).
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64)).copy()
    predictions = np.empty((windows.shape[0], horizon))
    spike_first = None
    for step in range(horizon):
        r_hat, spike_prob = model.predict(windows)
        predictions[:, step] = r_hat
        if spike_first is None:
            spike_first = spike_prob
        windows = np.concatenate([windows[:, 1:], r_hat[:, None]], axis=1)
    return predictions, spike_first


def predict_horizon(model: SpikeAwareLSTM, history: np.ndarray, horizon: int) -> ForecastBundle:
    """
    Forecast the next `horizon` demand values from raw demand history.

    The last seq_len values are standardized with the model's scaler, rolled out
    recursively, de-standardized and clamped to [0, 1].

    Raises:
        ValueError: If history holds fewer than seq_len values.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.size < model.seq_len:
        raise ValueError(f"history of {history.size} values is shorter than seq_len {model.seq_len}")
    window = model.scaler.transform(history[-model.seq_len:])
    predictions, spike_prob = rollout(model, window, horizon)
    values = np.clip(model.scaler.inverse(predictions[0]), 0.0, 1.0)
    return ForecastBundle(d_hat=tuple(values.tolist()), spike_prob=float(spike_prob[0]))


def forecast_table(model: SpikeAwareLSTM, series: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Forecasts for every step of a raw demand series in one batched pass.

    Row t uses the history series[:t+1], edge-padded to seq_len.

    Returns:
        (raw windows (N, seq_len), clamped forecasts (N, horizon), spike probabilities (N,)).
    """
    series = np.asarray(series, dtype=np.float64)
    padded = np.concatenate([np.full(model.seq_len - 1, series[0]), series])
    raw = np.lib.stride_tricks.sliding_window_view(padded, model.seq_len).copy()
    predictions, spike_prob = rollout(model, model.scaler.transform(raw), horizon)
    return raw, np.clip(model.scaler.inverse(predictions), 0.0, 1.0), spike_prob

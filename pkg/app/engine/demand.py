"""
Demand math: normalization, the analytic AI channel, spike labels, z-scoring,
windowing and surrogate trace synthesis.

Pure functions with no I/O. Every function accepts array-likes and returns new
float64 arrays.
"""
import numpy as np

from app.models.config import ConfigError
from app.models.trace import Scaler, WindowedDataset

STEPS_PER_DAY = 144
SCENARIOS = ("event-spike", "diurnal", "flat")


def normalize_ran_demand(counts: np.ndarray, eps: float = 1e-8, reference: np.ndarray | None = None) -> np.ndarray:
    """
    Min-max scale RNTI counts into [0, 1).

    d(t) = (RNTI_t − min) / (max − min + ε)

    With a `reference` series the min and max come from it instead, and values
    outside the reference range fall outside [0, 1).

    Example:
        counts (10, 20, 30), ε = 1e-8 → ≈ (0, 0.5, 1.0)
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.size == 0:
        raise ValueError("cannot normalize an empty series")
    basis = counts if reference is None else np.asarray(reference, dtype=np.float64)
    if basis.size == 0:
        raise ValueError("cannot normalize against an empty reference")
    low = basis.min()
    return (counts - low) / (basis.max() - low + eps)


def ai_demand_at(t: np.ndarray | float, period: int) -> np.ndarray:
    """AI demand at step(s) t: (sin(4πt/N) + 1) / 2, two full oscillations per N steps."""
    if period < 1:
        raise ValueError(f"AI demand period must be >= 1, got {period}")
    return (np.sin(4.0 * np.pi * np.asarray(t, dtype=np.float64) / period) + 1.0) / 2.0


def ai_demand(n_steps: int) -> np.ndarray:
    """
    AI demand over an evaluation horizon of N steps, t = 0..N−1.

    Example:
        N = 100 → d(0) = 0.5, d(12) ≈ 0.999
    """
    return ai_demand_at(np.arange(n_steps), n_steps)


def spike_threshold(train_values: np.ndarray, percentile: float = 90.0) -> float:
    """
    Percentile of the training split (linear interpolation).

    Raises:
        ConfigError: If percentile is outside (0, 100).
    """
    if not 0.0 < percentile < 100.0:
        raise ConfigError(f"spike percentile must lie in (0, 100), got {percentile}")
    train_values = np.asarray(train_values, dtype=np.float64)
    if train_values.size == 0:
        raise ValueError("cannot compute a spike threshold on an empty split")
    return float(np.percentile(train_values, percentile))


def label_spikes(values: np.ndarray, percentile: float = 90.0, threshold: float | None = None) -> np.ndarray:
    """
    Binary spike labels, 1 where the value strictly exceeds the threshold.

    Pass the training split's `threshold` when labelling any other split; when
    omitted it is computed from `values` themselves.

    Example:
        values 1..10, 90th percentile → only the last value is labelled 1
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot label an empty series")
    if threshold is None:
        threshold = spike_threshold(values, percentile)
    return (values > threshold).astype(np.float64)


def standardize(train: np.ndarray, apply_to: np.ndarray, eps: float = 1e-8) -> tuple[np.ndarray, Scaler]:
    """
    Z-score `apply_to` with the mean and standard deviation of `train`.

    A constant training split gets its standard deviation floored at `eps`.
    """
    train = np.asarray(train, dtype=np.float64)
    if train.size == 0:
        raise ValueError("cannot standardize with an empty training split")
    scaler = Scaler(mean=float(train.mean()), std=float(max(train.std(), eps)))
    return scaler.transform(apply_to), scaler


def make_windows(values: np.ndarray, labels: np.ndarray, seq_len: int = 10) -> WindowedDataset:
    """
    Slide a window of `seq_len` values over the series.

    Sample i has input values[i:i+seq_len], target values[i+seq_len] and the
    spike label of that target.

    Raises:
        ValueError: If the series is not longer than `seq_len`.
    """
    values = np.asarray(values, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if values.shape != labels.shape:
        raise ValueError("values and labels must have the same length")
    if values.size <= seq_len:
        raise ValueError(f"series of length {values.size} is too short for windows of {seq_len}")
    inputs = np.lib.stride_tricks.sliding_window_view(values, seq_len)[:-1].copy()
    return WindowedDataset(
        inputs=inputs,
        targets=values[seq_len:].copy(),
        spike_labels=labels[seq_len:].copy(),
    )


def edge_pad(history: np.ndarray, length: int) -> np.ndarray:
    """Last `length` values of history, left-padded with its first value when shorter."""
    history = np.asarray(history, dtype=np.float64)
    if history.size == 0:
        raise ValueError("history is empty")
    if history.size >= length:
        return history[-length:].copy()
    return np.concatenate([np.full(length - history.size, history[0]), history])


def synth_counts(kind: str, n_steps: int, rng: np.random.Generator) -> np.ndarray:
    """
    Surrogate RNTI counts at a 10-minute cadence (144 steps per day).

    - diurnal: 200 + 150·sin(2πt/144 − π/2) + noise, one dominant daily cycle.
    - event-spike: a mild daily cycle plus contiguous surges well above it.
    - flat: low-variance noise around 120.

    Raises:
        ValueError: If `kind` is unknown or n_steps < 1.
    """
    if kind not in SCENARIOS:
        raise ValueError(f"unknown scenario {kind!r}; expected one of {', '.join(SCENARIOS)}")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    t = np.arange(n_steps, dtype=np.float64)
    phase = 2.0 * np.pi * t / STEPS_PER_DAY - np.pi / 2.0

    if kind == "diurnal":
        counts = 200.0 + 150.0 * np.sin(phase) + rng.normal(0.0, 10.0, n_steps)
    elif kind == "flat":
        counts = 120.0 + rng.normal(0.0, 5.0, n_steps)
    else:
        counts = 150.0 + 40.0 * np.sin(phase) + rng.normal(0.0, 8.0, n_steps)
        counts += _surges(n_steps, rng)
    return np.clip(np.rint(counts), 0.0, None)


def _surges(n_steps: int, rng: np.random.Generator) -> np.ndarray:
    events = max(1, n_steps // (2 * STEPS_PER_DAY))
    length = min(12, max(1, n_steps // 4))
    surge = np.zeros(n_steps)
    slots = max(1, n_steps - length + 1)
    for start in np.sort(rng.choice(slots, size=min(events, slots), replace=False)):
        height = rng.uniform(220.0, 280.0)
        surge[start:start + length] = np.maximum(surge[start:start + length], height)
    return surge


def persistence_forecast(inputs: np.ndarray) -> np.ndarray:
    """Naive reference: the next value equals the last one in each window."""
    return np.asarray(inputs, dtype=np.float64)[:, -1].copy()

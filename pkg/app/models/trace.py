"""
Trace and demand records.

Array-valued records hold numpy arrays; they are validated once at construction
and treated as read-only afterwards.
"""
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator


class TraceSeries(BaseModel):
    """Timestamped RNTI counts from one cell, one row per control step."""

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    timestamps: np.ndarray
    rnti_count: np.ndarray
    source_label: str = Field("trace", min_length=1)

    @model_validator(mode="after")
    def _check_series(self) -> "TraceSeries":
        if self.timestamps.shape != self.rnti_count.shape or self.rnti_count.ndim != 1:
            raise ValueError("timestamps and rnti_count must be 1-D and of equal length")
        if self.rnti_count.size == 0:
            raise ValueError("trace is empty")
        if np.any(self.rnti_count < 0):
            raise ValueError("rnti_count must be non-negative")
        if np.any(np.diff(self.timestamps.astype("datetime64[s]").astype(np.int64)) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        return self

    def __len__(self) -> int:
        return int(self.rnti_count.size)


class DemandProfile(BaseModel):
    """Per-step (RAN, AI) demand as fractions of capacity."""

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    d_ran: np.ndarray
    d_ai: np.ndarray
    spike_labels: Optional[np.ndarray] = None
    source_label: str = "profile"

    @model_validator(mode="after")
    def _check_profile(self) -> "DemandProfile":
        if self.d_ran.shape != self.d_ai.shape or self.d_ran.ndim != 1:
            raise ValueError("d_ran and d_ai must be 1-D and of equal length")
        for name, values in (("d_ran", self.d_ran), ("d_ai", self.d_ai)):
            if not np.all(np.isfinite(values)) or np.any(values < 0.0) or np.any(values > 1.0):
                raise ValueError(f"{name} values must lie in [0, 1]")
        if self.spike_labels is not None and self.spike_labels.shape != self.d_ran.shape:
            raise ValueError("spike_labels must align with the demand channels")
        return self

    def __len__(self) -> int:
        return int(self.d_ran.size)


class Scaler(BaseModel):
    """Z-score statistics of a training split."""

    model_config = {"extra": "forbid", "frozen": True}

    mean: float
    std: float = Field(..., gt=0.0)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (np.asarray(values, dtype=np.float64) - self.mean) / self.std

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.std + self.mean


class WindowedDataset(BaseModel):
    """Supervised samples: a window of past values, the next value, and its spike label."""

    model_config = {"arbitrary_types_allowed": True, "frozen": True}

    inputs: np.ndarray
    targets: np.ndarray
    spike_labels: np.ndarray

    @model_validator(mode="after")
    def _check_dataset(self) -> "WindowedDataset":
        if self.inputs.ndim != 2:
            raise ValueError("inputs must be (samples, seq_len)")
        samples = self.inputs.shape[0]
        if self.targets.shape != (samples,) or self.spike_labels.shape != (samples,):
            raise ValueError("targets and spike_labels must have one entry per sample")
        if not np.all(np.isin(self.spike_labels, (0.0, 1.0))):
            raise ValueError("spike_labels must be 0 or 1")
        return self

    @property
    def seq_len(self) -> int:
        return int(self.inputs.shape[1])

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

"""
Trace I/O and demand-profile assembly.

File format: CSV with columns timestamp,rnti_count; header optional; timestamps
ISO-8601 or epoch seconds; one row per control step.
"""
import hashlib
import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
import pandas as pd

from app.engine.demand import ai_demand_at, label_spikes, normalize_ran_demand, synth_counts
from app.engine.rng import fresh_stream
from app.models.trace import DemandProfile, TraceSeries
from app.structured_log import log_event
from app.validators.errors import ValidationError
from app.validators.trace_validator import RAW_COLUMNS, validate_trace_frame

logger = logging.getLogger("traces")

SYNTH_START = np.datetime64("2024-01-01T00:00:00", "ns")
SYNTH_CADENCE = np.timedelta64(10, "m")

PathLike = Union[str, Path]


def load_trace(path: PathLike, source_label: Optional[str] = None) -> TraceSeries:
    """
    Read and validate a trace file.

    Raises:
        ValidationError: MISSING_FILE, or any row-level code from validate_trace_frame.
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(
            code="MISSING_FILE",
            message=f"Trace file not found: {path}",
            details={"path": str(path)},
            http_status=404,
        )
    try:
        frame = pd.read_csv(
            path,
            header=None,
            names=RAW_COLUMNS,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=False,
        )
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise ValidationError(
            code="UNPARSEABLE_ROW",
            message=f"{path}: {exc}",
            details={"path": str(path)},
        ) from exc

    timestamps, counts = validate_trace_frame(frame, str(path))
    series = TraceSeries(
        timestamps=timestamps,
        rnti_count=counts,
        source_label=source_label or path.stem,
    )
    log_event(logger, "trace_loaded", path=str(path), rows=len(series), source=series.source_label)
    return series


def save_trace(series: TraceSeries, path: PathLike) -> Path:
    """Write a series in the loadable CSV format, ISO-8601 timestamps with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        {
            "timestamp": pd.to_datetime(series.timestamps).strftime("%Y-%m-%dT%H:%M:%S"),
            "rnti_count": series.rnti_count.astype(np.int64),
        }
    )
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def synth_trace(kind: str, n_steps: int, seed: int) -> TraceSeries:
    """
    Deterministic surrogate trace at a 10-minute cadence.

    Raises:
        ValueError: If `kind` is unknown.
    """
    counts = synth_counts(kind, n_steps, fresh_stream(seed, f"synthesis:{kind}"))
    timestamps = SYNTH_START + SYNTH_CADENCE * np.arange(n_steps)
    return TraceSeries(timestamps=timestamps, rnti_count=counts.astype(np.int64), source_label=f"synthetic-{kind}")


def build_profile(
    series: TraceSeries,
    ai_period: Optional[int] = None,
    eps: float = 1e-8,
    spike_threshold: Optional[float] = None,
) -> DemandProfile:
    """
    Normalized RAN demand from the trace plus the analytic AI channel.

    Args:
        series: Validated trace.
        ai_period: N of the AI channel; the trace length when omitted.
        eps: Normalization epsilon.
        spike_threshold: Training-split threshold on normalized RAN demand; labels
            are attached when given.
    """
    d_ran = normalize_ran_demand(series.rnti_count, eps)
    d_ai = ai_demand_at(np.arange(len(series)), ai_period or len(series))
    labels = label_spikes(d_ran, threshold=spike_threshold) if spike_threshold is not None else None
    return DemandProfile(d_ran=d_ran, d_ai=d_ai, spike_labels=labels, source_label=series.source_label)


def export_profile(profile: DemandProfile, path: PathLike) -> Path:
    """Write (t, d_ran, d_ai, spike_label) rows for inspection."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    labels = profile.spike_labels if profile.spike_labels is not None else np.zeros(len(profile))
    pd.DataFrame(
        {
            "t": np.arange(len(profile)),
            "d_ran": profile.d_ran,
            "d_ai": profile.d_ai,
            "spike_label": labels.astype(np.int64),
        }
    ).to_csv(path, index=False, lineterminator="\n")
    return path


def profile_hash(profile: DemandProfile) -> str:
    """SHA-256 over the exact float64 bytes of both demand channels."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(profile.d_ran, dtype=np.float64).tobytes())
    digest.update(np.ascontiguousarray(profile.d_ai, dtype=np.float64).tobytes())
    return digest.hexdigest()


def series_hash(series: TraceSeries) -> str:
    """SHA-256 over the timestamps and counts of a trace."""
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(series.timestamps).astype("datetime64[ns]").view(np.int64).tobytes())
    digest.update(np.ascontiguousarray(series.rnti_count, dtype=np.int64).tobytes())
    return digest.hexdigest()

"""
Episode metrics and comparison-report assembly.

Pure functions over telemetry tables; every reported number can be recomputed
from the telemetry log alone.
"""
import logging
from typing import Optional

import numpy as np
import pandas as pd

from app.engine.policies import POLICY_ORDER
from app.models.config import EnvConfig
from app.models.report import ComparisonReport, EpisodeReport
from app.structured_log import log_event

logger = logging.getLogger("orchestrator")

SPIKE_WINDOW_PERCENTILE = 90.0


def completion_rate(completed: np.ndarray, demand: np.ndarray) -> float:
    """
    100·ΣC / Σd, aggregated as a ratio of sums.

    Zero total demand is vacuously met and reported as 100; callers flag it.

    Raises:
        ValueError: On a length mismatch.
    """
    completed = np.asarray(completed, dtype=np.float64)
    demand = np.asarray(demand, dtype=np.float64)
    if completed.shape != demand.shape:
        raise ValueError(f"completed {completed.shape} and demand {demand.shape} differ in length")
    total = demand.sum()
    if total <= 0.0:
        return 100.0
    return float(min(100.0, 100.0 * completed.sum() / total))


def ideal_ratio(d_ran: np.ndarray | float, d_ai: np.ndarray | float) -> np.ndarray:
    """
    Demand-proportional RAN share d_ran / (d_ran + d_ai); 0.5 when both are zero.

    Also used for the actual ratio r_ran / (r_ran + r_ai).

    Example:
        d = (0.6, 0.2) → 0.75
    """
    d_ran = np.asarray(d_ran, dtype=np.float64)
    d_ai = np.asarray(d_ai, dtype=np.float64)
    total = d_ran + d_ai
    safe = np.where(total > 0.0, total, 1.0)
    return np.where(total > 0.0, d_ran / safe, 0.5)


def adaptability(alpha_star: np.ndarray, alpha: np.ndarray) -> float:
    """
    1 − mean_t |α*_t − α_t|.

    Raises:
        ValueError: On a length mismatch or an empty series.

    Example:
        gaps (0.1, 0.3) → 0.8
    """
    alpha_star = np.asarray(alpha_star, dtype=np.float64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha_star.shape != alpha.shape:
        raise ValueError(f"ideal {alpha_star.shape} and actual {alpha.shape} ratios differ in length")
    if alpha.size == 0:
        raise ValueError("adaptability needs at least one step")
    return float(1.0 - np.mean(np.abs(alpha_star - alpha)))


def utilization(mig_ran: np.ndarray, mig_ai: np.ndarray, r_max: int) -> float:
    """100·mean_t (mig_ran + mig_ai) / R_max."""
    mig_ran = np.asarray(mig_ran, dtype=np.float64)
    if mig_ran.size == 0:
        raise ValueError("utilization needs at least one step")
    return float(100.0 * np.mean((mig_ran + np.asarray(mig_ai, dtype=np.float64)) / r_max))


def episode_report(policy: str, telemetry: pd.DataFrame, config: EnvConfig, telemetry_file: Optional[str] = None) -> EpisodeReport:
    """Summarize one policy's telemetry table (columns per TELEMETRY_COLUMNS)."""
    if telemetry.empty:
        raise ValueError(f"no telemetry rows for policy {policy!r}")
    vacuous = [
        channel for channel in ("ran", "ai") if telemetry[f"d_{channel}"].sum() <= 0.0
    ]
    if vacuous:
        log_event(logger, "vacuous_demand", level=logging.WARNING, policy=policy, channels=vacuous)

    threshold = np.percentile(telemetry["d_ran"], SPIKE_WINDOW_PERCENTILE)
    spikes = telemetry[telemetry["d_ran"] > threshold]
    return EpisodeReport(
        policy=policy,
        steps=len(telemetry),
        completion_ran_pct=completion_rate(telemetry["c_ran"], telemetry["d_ran"]),
        completion_ai_pct=completion_rate(telemetry["c_ai"], telemetry["d_ai"]),
        adaptability=adaptability(
            ideal_ratio(telemetry["d_ran"], telemetry["d_ai"]),
            ideal_ratio(telemetry["r_ran"], telemetry["r_ai"]),
        ),
        mean_reward=float(telemetry["reward"].mean()),
        utilization_pct=utilization(telemetry["mig_ran"], telemetry["mig_ai"], config.r_max),
        spike_steps=len(spikes),
        spike_completion_ran_pct=completion_rate(spikes["c_ran"], spikes["d_ran"]),
        spike_completion_ai_pct=completion_rate(spikes["c_ai"], spikes["d_ai"]),
        vacuous_channels=vacuous,
        telemetry_file=telemetry_file,
    )


def assemble_report(
    telemetry: dict[str, pd.DataFrame],
    config: EnvConfig,
    trace_hash: str,
    telemetry_files: Optional[dict[str, str]] = None,
) -> ComparisonReport:
    """
    Per-policy reports in fixed order (sac, balanced, ran_priority) plus a text table.

    Raises:
        ValueError: If no policy telemetry is given or a policy name is unknown.
    """
    if not telemetry:
        raise ValueError("at least one policy run is required")
    known = [kind.value for kind in POLICY_ORDER]
    unknown = sorted(set(telemetry) - set(known))
    if unknown:
        raise ValueError(f"unknown policies: {', '.join(unknown)}")
    files = telemetry_files or {}
    rows = [
        episode_report(name, telemetry[name], config, files.get(name))
        for name in known
        if name in telemetry
    ]
    return ComparisonReport(trace_hash=trace_hash, rows=rows, table=format_table(rows))


def format_table(rows: list[EpisodeReport]) -> str:
    frame = pd.DataFrame(
        {
            "policy": [r.policy for r in rows],
            "RAN %": [r.completion_ran_pct for r in rows],
            "AI %": [r.completion_ai_pct for r in rows],
            "adaptability": [r.adaptability for r in rows],
            "mean reward": [r.mean_reward for r in rows],
            "utilization %": [r.utilization_pct for r in rows],
            "spike RAN %": [r.spike_completion_ran_pct for r in rows],
            "spike AI %": [r.spike_completion_ai_pct for r in rows],
        }
    )
    return frame.to_string(index=False, float_format=lambda v: f"{v:.3f}")

"""
Allocation engine for the two service groups (RAN, AI).

Pure functions with no side effects or I/O. All quantities are fractions of
physical capacity; MIG integers appear only at quantization. Pairs are ordered
(RAN, AI).
"""
import math
from typing import NamedTuple, Sequence

import numpy as np

from app.models.config import EnvConfig
from app.models.environment import OrchestratorState
from app.models.forecast import ForecastBundle

Pair = tuple[float, float]

QUANTIZE_TOLERANCE = 1e-9


class Allocation(NamedTuple):
    r_temp: Pair
    target: Pair
    r: Pair
    mig: tuple[int, int]
    capacity: float


def build_state(d_ran: float, d_ai: float, forecast_ran: ForecastBundle, forecast_ai: ForecastBundle, r_prev: Pair) -> OrchestratorState:
    """
    Assemble the agent's observation.

    Raises:
        ValueError: If any entry lies outside [0, 1] or the horizons differ.

    Example:
        H = 3 → dimension 2 + 2·3 + 2 = 10
    """
    return OrchestratorState(
        d_ran=d_ran,
        d_ai=d_ai,
        d_hat_ran=forecast_ran.d_hat,
        d_hat_ai=forecast_ai.d_hat,
        r_prev_ran=r_prev[0],
        r_prev_ai=r_prev[1],
    )


def completion_probability(delta: int, mean_lifetime: float) -> float:
    """P_c(δ) = 1 − exp(−δ / mean lifetime): chance a running task has finished δ steps ahead."""
    return 1.0 - math.exp(-delta / mean_lifetime)


def predicted_free(r_prev: Pair, config: EnvConfig, delta: int) -> float:
    """
    Capacity expected to be released δ steps ahead: Σ_x P_c(x, δ)·r_x(t−1).

    Example:
        P_c = 0.5 for both services, r = (0.4, 0.2) → 0.3
    """
    if not 1 <= delta <= config.horizon:
        raise ValueError(f"delta must lie in [1, {config.horizon}], got {delta}")
    return (
        completion_probability(delta, config.mean_task_lifetime_ran) * r_prev[0]
        + completion_probability(delta, config.mean_task_lifetime_ai) * r_prev[1]
    )


def total_capacity(r_prev: Pair, config: EnvConfig) -> float:
    """R_total = 1 + min(Σ_δ α_δ·Δ̂_free(t+δ), borrow_cap)."""
    borrowed = sum(
        alpha * predicted_free(r_prev, config, delta)
        for delta, alpha in enumerate(config.borrow_coefficients, start=1)
    )
    return 1.0 + min(borrowed, config.borrow_cap)


def contention_factor(d_total_now: float, d_total_forecasts: Sequence[float], beta: float) -> float:
    """
    C_pred = Δ_total(t) + Σ_δ β^δ·Δ_total(t+δ), totals in capacity fractions.

    Example:
        H = 1, totals 10/21 now and 10/21 next, β = 0.9 → 19/21 ≈ 0.9048
    """
    return d_total_now + sum(beta ** delta * total for delta, total in enumerate(d_total_forecasts, start=1))


def scale_to_capacity(r_temp: Pair, priorities: Pair, capacity: float) -> Pair:
    """
    Priority-weighted scaling of an over-budget request.

    r_x = capacity·p_x·r_temp_x / Σ_y p_y·r_temp_y; a share above its own request is
    capped there and the excess granted to the other service up to its request.

    Example:
        r_temp = (0.8, 0.6), p = (1.0, 0.5), capacity 1.0 → (0.727…, 0.272…)
    """
    if r_temp[0] + r_temp[1] <= capacity:
        return r_temp
    weights = (priorities[0] * r_temp[0], priorities[1] * r_temp[1])
    if weights[0] + weights[1] <= 0.0:
        weights = r_temp
    total = weights[0] + weights[1]
    share = [capacity * weights[0] / total, capacity * weights[1] / total]
    for x, y in ((0, 1), (1, 0)):
        if share[x] > r_temp[x]:
            excess = share[x] - r_temp[x]
            share[x] = r_temp[x]
            share[y] = min(r_temp[y], share[y] + excess)
    return share[0], share[1]


def enforce_rate_floor(r: Pair, r_prev: Pair, v_max: float) -> Pair:
    """
    Keep each allocation at or above r_prev − v_max, taking the shortfall from the
    other service without pushing it below its own floor.
    """
    floors = (max(0.0, r_prev[0] - v_max), max(0.0, r_prev[1] - v_max))
    out = [r[0], r[1]]
    for x, y in ((0, 1), (1, 0)):
        if out[x] < floors[x]:
            deficit = floors[x] - out[x]
            out[x] = floors[x]
            out[y] = max(floors[y], out[y] - deficit)
    return out[0], out[1]


def quantize(r: Pair, r_max: int) -> tuple[int, int]:
    """Floor each share to whole MIG quanta; the pair never exceeds r_max."""
    mig = [int(math.floor(v * r_max + QUANTIZE_TOLERANCE)) for v in r]
    while mig[0] + mig[1] > r_max:
        # lower-priority (AI) side yields first
        if mig[1] > 0:
            mig[1] -= 1
        else:
            mig[0] -= 1
    return mig[0], mig[1]


def apply_action(r_prev: Pair, delta: Sequence[float], config: EnvConfig) -> Allocation:
    """
    Turn a requested allocation change into a feasible, rate-limited, quantized grant.

    1. Δr clipped to ±v_max (non-finite entries count as 0).
    2. r_temp = clamp(r_prev + Δr, 0, 1).
    3. R_total = 1 + borrowable capacity from predicted task completions.
    4. Over-budget requests are scaled by priority to R_total, then floored at
       r_prev − v_max so scaling never breaks the rate limit.
    5. The physical grant is fitted to capacity 1 the same way.
    6. Shares are floored to MIG quanta.

    Example:
        Δr = (0.3, 0), v_max = 0.1 → effective Δr_ran = 0.1
    """
    v_max = config.v_max
    step = [float(np.clip(d, -v_max, v_max)) if math.isfinite(d) else 0.0 for d in delta]
    r_temp = (
        min(1.0, max(0.0, r_prev[0] + step[0])),
        min(1.0, max(0.0, r_prev[1] + step[1])),
    )
    capacity = total_capacity(r_prev, config)
    target = enforce_rate_floor(scale_to_capacity(r_temp, config.priorities, capacity), r_prev, v_max)
    physical = enforce_rate_floor(scale_to_capacity(target, config.priorities, 1.0), r_prev, v_max)
    mig = quantize(physical, config.r_max)
    r = (mig[0] * config.mig_quantum, mig[1] * config.mig_quantum)
    return Allocation(r_temp=r_temp, target=target, r=r, mig=mig, capacity=capacity)


def completed(r: float, d: float) -> float:
    """Demand served this step: C = min(r, d)."""
    return min(r, d)


def reward(
    r: Pair,
    d: Pair,
    d_hat_next: Pair,
    c_pred: float,
    config: EnvConfig,
) -> float:
    """
    Proactive reward.

        R' = Σ_x [w_x·C_x/d_x + μ·min(p_x·r_x, d̂_x(t+1))/d_x]
             − λ·[(R_alloc + β·R̂_alloc)^κ − 1] − η·C_pred

    with w_x = p_x ("weighted", default) or 1 ("unweighted"), R_alloc = Σ r_x and
    R̂_alloc = Σ d̂_x(t+1). When d_x is below demand_eps both ratios count as 1 if
    r_x ≥ d_x and 0 otherwise.

    Example:
        p = (1, 0.5), C/d = (1, 1), μ = λ = η = 0 → 1.5
    """
    qos = 0.0
    for x in (0, 1):
        p = config.priorities[x]
        weight = p if config.reward_form == "weighted" else 1.0
        if d[x] < config.demand_eps:
            met = 1.0 if r[x] >= d[x] else 0.0
            qos += weight * met + config.mu * met
            continue
        qos += weight * completed(r[x], d[x]) / d[x]
        qos += config.mu * min(p * r[x], d_hat_next[x]) / d[x]

    load = (r[0] + r[1]) + config.beta_fut * (d_hat_next[0] + d_hat_next[1])
    return qos - overprovision_penalty(load, config) - config.eta * c_pred


def overprovision_penalty(load: float, config: EnvConfig) -> float:
    """λ·[(R_alloc + β·R̂_alloc)^κ − 1]: zero at capacity 1, increasing beyond it."""
    return config.lambda_pen * (load ** config.kappa - 1.0)


def workload_increment(
    d_total: float,
    d_hat_total: float,
    spike_prob: float,
    r: Pair,
    c_pred: float,
    config: EnvConfig,
) -> float:
    """
    One step of the workload-evolution accumulator W(t):

        ½(d_total + d̂_total·(1 − ŝ)) − Σ_x P_c(x, 1)·r_x·C_pred

    Diagnostic only; never feeds back into control.
    """
    fused = 0.5 * (d_total + d_hat_total * (1.0 - spike_prob))
    releasing = (
        completion_probability(1, config.mean_task_lifetime_ran) * r[0]
        + completion_probability(1, config.mean_task_lifetime_ai) * r[1]
    )
    return fused - releasing * c_pred


def workload_telemetry(
    d_total: np.ndarray,
    d_hat_total: np.ndarray,
    spike_prob: np.ndarray,
    r_ran: np.ndarray,
    r_ai: np.ndarray,
    c_pred: np.ndarray,
    config: EnvConfig,
) -> np.ndarray:
    """Cumulative W(t) over a recorded episode."""
    if len(d_total) == 0:
        raise ValueError("workload telemetry needs at least one step")
    increments = [
        workload_increment(dt, dh, s, (a, b), c, config)
        for dt, dh, s, a, b, c in zip(d_total, d_hat_total, spike_prob, r_ran, r_ai, c_pred)
    ]
    return np.cumsum(increments)

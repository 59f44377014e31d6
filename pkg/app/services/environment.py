"""
The AI-RAN coexistence environment.

Each step: read the current KPI message → forecast both channels → build the
observation → take an action → constrained allocation → completion → reward.
Demand arrives only through the KPI channel, so a live channel and a replay of
its recording drive identical episodes.
"""
import threading
from typing import Iterator, NamedTuple, Optional, Protocol

import numpy as np
import pandas as pd

from app.engine import allocation
from app.engine.demand import ai_demand_at, edge_pad
from app.engine.forecaster import SpikeAwareLSTM, predict_horizon
from app.models.config import EnvConfig
from app.models.environment import TELEMETRY_COLUMNS, OrchestratorState, StepTelemetry
from app.models.forecast import ForecastBundle
from app.models.kpi import KpiMessage

Pair = tuple[float, float]


class EpisodeError(Exception):
    """Raised when the environment is stepped outside an active episode."""
    pass


class ForecastSource(Protocol):
    def forecast(self, history: np.ndarray, horizon: int) -> ForecastBundle: ...


class PersistenceForecastSource:
    """Every future step equals the last observed value; no spike signal."""

    def forecast(self, history: np.ndarray, horizon: int) -> ForecastBundle:
        last = float(np.clip(history[-1], 0.0, 1.0))
        return ForecastBundle(d_hat=(last,) * horizon, spike_prob=0.0)


class LstmForecastSource:
    """
    SpikeAwareLSTM forecasts memoized by input window.

    Histories shorter than the model's window are edge-padded with their first
    value. The memo is shared by every environment using this source.
    """

    def __init__(self, model: SpikeAwareLSTM):
        self.model = model
        self._lock = threading.Lock()
        self._memo: dict[tuple[bytes, int], ForecastBundle] = {}

    def forecast(self, history: np.ndarray, horizon: int) -> ForecastBundle:
        window = edge_pad(history, self.model.seq_len)
        key = (window.tobytes(), horizon)
        with self._lock:
            cached = self._memo.get(key)
        if cached is not None:
            return cached
        bundle = predict_horizon(self.model, window, horizon)
        with self._lock:
            self._memo[key] = bundle
        return bundle

    def clear(self) -> None:
        with self._lock:
            self._memo.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._memo)


class StepResult(NamedTuple):
    """
    `done` marks a true end (the KPI channel ran out); `truncated` marks the
    episode step limit. Only `done` stops the critic from bootstrapping.
    """
    state: OrchestratorState
    reward: float
    done: bool
    truncated: bool
    telemetry: StepTelemetry

    @property
    def finished(self) -> bool:
        return self.done or self.truncated


class CoexistenceEnv:
    """
    One episode at a time over a KPI channel. Not shared between threads.

    Args:
        config: Environment knobs.
        forecasts: Source of RAN forecasts; the AI channel is forecast exactly from
            its analytic curve.
        ai_period: N of the AI demand curve.
    """

    def __init__(self, config: EnvConfig, forecasts: ForecastSource, ai_period: int):
        if ai_period < 1:
            raise ValueError(f"ai_period must be >= 1, got {ai_period}")
        self.config = config
        self.forecasts = forecasts
        self.ai_period = ai_period
        self._channel: Optional[Iterator[KpiMessage]] = None
        self._rows: list[StepTelemetry] = []

    def reset(
        self,
        channel: Iterator[KpiMessage],
        steps: int,
        warm_history: Optional[np.ndarray] = None,
        initial_allocation: Optional[Pair] = None,
        ai_offset: int = 0,
    ) -> OrchestratorState:
        """
        Start an episode of at most `steps` steps.

        Args:
            channel: KPI messages numbered from t = 0.
            steps: Episode length limit.
            warm_history: RAN demand preceding the first message, for the forecaster.
            initial_allocation: r(−1); the config default when omitted.
            ai_offset: Position of t = 0 on the AI demand curve.

        Raises:
            EpisodeError: If the channel is empty.
        """
        if steps < 1:
            raise ValueError(f"steps must be >= 1, got {steps}")
        self._channel = iter(channel)
        self._steps = steps
        self._ai_offset = ai_offset
        self._history = [] if warm_history is None else [float(v) for v in warm_history]
        self._r_prev = tuple(initial_allocation or self.config.initial_allocation)
        self._w = 0.0
        self._rows = []
        message = next(self._channel, None)
        if message is None:
            self._channel = None
            raise EpisodeError("KPI channel produced no messages")
        self._observe(message)
        return self.state

    @property
    def state(self) -> OrchestratorState:
        return self._state

    @property
    def steps_done(self) -> int:
        return len(self._rows)

    def _observe(self, message: KpiMessage) -> None:
        self._message = message
        self._history.append(message.d_ran)
        self._forecast_ran = self.forecasts.forecast(np.asarray(self._history), self.config.horizon)
        phase = self._ai_offset + message.t + np.arange(1, self.config.horizon + 1)
        self._forecast_ai = ForecastBundle(d_hat=tuple(ai_demand_at(phase, self.ai_period).tolist()))
        self._state = allocation.build_state(
            message.d_ran, message.d_ai, self._forecast_ran, self._forecast_ai, self._r_prev
        )

    def step(self, action: np.ndarray) -> StepResult:
        """
        Apply one action in [−1, 1]^2 (scaled to ±v_max) and advance one step.

        Raises:
            EpisodeError: If no episode is active.
        """
        if self._channel is None:
            raise EpisodeError("step() called without an active episode; call reset() first")
        cfg = self.config
        action = np.asarray(action, dtype=np.float64)
        delta = np.clip(action, -1.0, 1.0) * cfg.v_max

        message = self._message
        d = (message.d_ran, message.d_ai)
        d_hat_next = (self._forecast_ran.d_hat[0], self._forecast_ai.d_hat[0])
        grant = allocation.apply_action(self._r_prev, delta, cfg)
        c = (allocation.completed(grant.r[0], d[0]), allocation.completed(grant.r[1], d[1]))

        now_total = d[0] + d[1] if cfg.contention_basis == "demand" else grant.r[0] + grant.r[1]
        future_totals = [a + b for a, b in zip(self._forecast_ran.d_hat, self._forecast_ai.d_hat)]
        c_pred = allocation.contention_factor(now_total, future_totals, cfg.beta_fut)
        reward = allocation.reward(grant.r, d, d_hat_next, c_pred, cfg)
        self._w += allocation.workload_increment(
            d[0] + d[1], d_hat_next[0] + d_hat_next[1], self._forecast_ran.spike_prob, grant.r, c_pred, cfg
        )

        row = StepTelemetry(
            t=message.t,
            d_ran=d[0],
            d_ai=d[1],
            d_hat_ran_1=d_hat_next[0],
            d_hat_ai_1=d_hat_next[1],
            r_ran=grant.r[0],
            r_ai=grant.r[1],
            mig_ran=grant.mig[0],
            mig_ai=grant.mig[1],
            c_ran=c[0],
            c_ai=c[1],
            reward=reward,
            c_pred=c_pred,
            spike_prob=self._forecast_ran.spike_prob,
            w=self._w,
        )
        self._rows.append(row)
        self._r_prev = grant.r

        # the step limit never reads past the last message, so its next state keeps
        # the current demand with the new allocation
        at_limit = len(self._rows) >= self._steps
        following = None if at_limit else next(self._channel, None)
        if following is None:
            self._state = allocation.build_state(
                message.d_ran, message.d_ai, self._forecast_ran, self._forecast_ai, self._r_prev
            )
            self._channel = None
            return StepResult(self._state, reward, not at_limit, at_limit, row)

        self._observe(following)
        return StepResult(self._state, reward, False, False, row)

    def telemetry(self) -> pd.DataFrame:
        """Rows of the current (or last) episode, columns per TELEMETRY_COLUMNS."""
        return pd.DataFrame([row.model_dump() for row in self._rows], columns=TELEMETRY_COLUMNS)

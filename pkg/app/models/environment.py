"""
Environment records: the agent's observation and the telemetry row written for
every step.
"""
import numpy as np
from pydantic import BaseModel, Field, model_validator

TELEMETRY_COLUMNS = [
    "t",
    "d_ran",
    "d_ai",
    "d_hat_ran_1",
    "d_hat_ai_1",
    "r_ran",
    "r_ai",
    "mig_ran",
    "mig_ai",
    "c_ran",
    "c_ai",
    "reward",
    "c_pred",
    "spike_prob",
    "w",
]


class OrchestratorState(BaseModel):
    """
    Observation layout: (d_ran, d_ai, d̂_ran(+1..+H), d̂_ai(+1..+H), r_prev_ran, r_prev_ai).
    """

    model_config = {"extra": "forbid", "frozen": True}

    d_ran: float = Field(..., ge=0.0, le=1.0)
    d_ai: float = Field(..., ge=0.0, le=1.0)
    d_hat_ran: tuple[float, ...] = Field(..., min_length=1)
    d_hat_ai: tuple[float, ...] = Field(..., min_length=1)
    r_prev_ran: float = Field(..., ge=0.0, le=1.0)
    r_prev_ai: float = Field(..., ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _check_forecasts(self) -> "OrchestratorState":
        if len(self.d_hat_ran) != len(self.d_hat_ai):
            raise ValueError("both forecast channels need the same horizon")
        if any(not 0.0 <= v <= 1.0 for v in self.d_hat_ran + self.d_hat_ai):
            raise ValueError("forecast entries must lie in [0, 1]")
        return self

    @property
    def horizon(self) -> int:
        return len(self.d_hat_ran)

    @property
    def dimension(self) -> int:
        return 2 + 2 * self.horizon + 2

    def to_vector(self) -> np.ndarray:
        return np.array(
            (self.d_ran, self.d_ai, *self.d_hat_ran, *self.d_hat_ai, self.r_prev_ran, self.r_prev_ai),
            dtype=np.float64,
        )

    @classmethod
    def from_vector(cls, vector: np.ndarray, horizon: int) -> "OrchestratorState":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.shape != (2 + 2 * horizon + 2,):
            raise ValueError(f"state vector of shape {vector.shape} does not match horizon {horizon}")
        values = vector.tolist()
        return cls(
            d_ran=values[0],
            d_ai=values[1],
            d_hat_ran=tuple(values[2:2 + horizon]),
            d_hat_ai=tuple(values[2 + horizon:2 + 2 * horizon]),
            r_prev_ran=values[-2],
            r_prev_ai=values[-1],
        )


class StepTelemetry(BaseModel):
    """One row of the per-step telemetry log; field order matches TELEMETRY_COLUMNS."""

    model_config = {"extra": "forbid", "frozen": True}

    t: int
    d_ran: float
    d_ai: float
    d_hat_ran_1: float
    d_hat_ai_1: float
    r_ran: float
    r_ai: float
    mig_ran: int
    mig_ai: int
    c_ran: float
    c_ai: float
    reward: float
    c_pred: float
    spike_prob: float
    w: float

from pydantic import BaseModel, Field, field_validator


class ForecastBundle(BaseModel):
    """H-step-ahead demand predictions for one channel plus the first-step spike probability."""

    model_config = {"extra": "forbid", "frozen": True}

    d_hat: tuple[float, ...] = Field(..., min_length=1)
    spike_prob: float = Field(0.0, ge=0.0, le=1.0)

    @field_validator("d_hat")
    @classmethod
    def _check_range(cls, value: tuple[float, ...]) -> tuple[float, ...]:
        if any(not 0.0 <= v <= 1.0 for v in value):
            raise ValueError("forecasts must be clamped to [0, 1]")
        return value

    @property
    def horizon(self) -> int:
        return len(self.d_hat)


class TrainingHistory(BaseModel):
    """Inference-mode full-set loss before training (index 0) and after each epoch."""

    losses: list[float] = Field(default_factory=list)
    epochs: int = 0
    samples: int = 0

    @property
    def initial_loss(self) -> float:
        return self.losses[0]

    @property
    def final_loss(self) -> float:
        return self.losses[-1]


class ForecastEvaluation(BaseModel):
    samples: int
    mse: float
    spike_precision: float
    spike_recall: float
    spike_f1: float
    persistence_mse: float
    skill: float = Field(..., description="1 - mse / persistence_mse")
    positives: int
    predicted_positives: int

from typing import Optional

from pydantic import BaseModel, Field


class EpisodeReport(BaseModel):
    policy: str
    steps: int = Field(..., ge=0)
    completion_ran_pct: float = Field(..., ge=0.0, le=100.0)
    completion_ai_pct: float = Field(..., ge=0.0, le=100.0)
    adaptability: float
    mean_reward: float
    utilization_pct: float = Field(..., ge=0.0, le=100.0)
    spike_steps: int = Field(0, ge=0, description="steps whose RAN demand exceeds the episode's 90th percentile")
    spike_completion_ran_pct: float = Field(100.0, ge=0.0, le=100.0, description="proxy for proactive efficiency")
    spike_completion_ai_pct: float = Field(100.0, ge=0.0, le=100.0, description="proxy for proactive efficiency")
    vacuous_channels: list[str] = Field(default_factory=list, description="channels with zero total demand")
    telemetry_file: Optional[str] = None


class ComparisonReport(BaseModel):
    trace_hash: str
    rows: list[EpisodeReport]
    table: str

    def row(self, policy: str) -> EpisodeReport:
        for row in self.rows:
            if row.policy == policy:
                return row
        raise KeyError(policy)


class EpisodeCurve(BaseModel):
    """One line of the agent training-curve log."""

    episode: int
    offset: int
    steps: int
    total_reward: float
    mean_reward: float
    critic_loss: Optional[float] = None
    actor_loss: Optional[float] = None
    updates: int = 0


class AgentTrainingResult(BaseModel):
    episodes: int
    total_steps: int
    updates: int
    best_mean_reward: float
    best_checkpoint: str
    final_checkpoint: str
    curves_file: str
    aborted: bool = False
    abort_reason: Optional[str] = None

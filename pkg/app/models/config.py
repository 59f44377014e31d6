"""
Run configuration documents.

Every section rejects unknown keys so a typo in a config file fails loudly
instead of silently falling back to a default. Field descriptions double as the
`--help` reference printed by the CLI.
"""
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

PUBLISHED = "published setting"
CONVENTIONAL = "conventional default"
CHOSEN = "chosen default; tunable"


class ConfigError(Exception):
    """Raised when a runtime knob is outside its admissible range."""
    pass


class EnvConfig(BaseModel):
    model_config = {"extra": "forbid"}

    r_max: int = Field(21, ge=1, description=f"capacity in MIG quanta ({PUBLISHED})")
    v_max: float = Field(0.1, gt=0.0, le=1.0, description=f"max allocation change per step, fraction of capacity ({CHOSEN})")
    p_ran: float = Field(1.0, ge=0.0, le=1.0, description=f"RAN priority ({CHOSEN}; RAN has precedence)")
    p_ai: float = Field(0.5, ge=0.0, le=1.0, description=f"AI priority ({CHOSEN})")
    mu: float = Field(0.5, ge=0.0, description=f"anticipation weight in the reward ({CHOSEN})")
    lambda_pen: float = Field(1.0, ge=0.0, description=f"overprovisioning penalty coefficient ({CHOSEN})")
    eta: float = Field(0.5, ge=0.0, description=f"contention penalty coefficient ({CHOSEN})")
    kappa: float = Field(2.5, gt=1.0, description=f"penalty curvature ({PUBLISHED})")
    beta_fut: float = Field(0.9, gt=0.0, lt=1.0, description=f"future contention discount ({PUBLISHED})")
    horizon: int = Field(3, ge=1, le=24, description=f"forecast horizon H in steps ({CHOSEN})")
    alpha_borrow: Optional[list[float]] = Field(
        None, description=f"borrowing coefficients per horizon step; default 0.5**delta ({CHOSEN})"
    )
    borrow_cap: float = Field(0.2, ge=0.0, le=1.0, description=f"cap on borrowed capacity, fraction ({CHOSEN})")
    mean_task_lifetime_ran: float = Field(2.0, gt=0.0, description=f"RAN mean task lifetime in steps ({CHOSEN})")
    mean_task_lifetime_ai: float = Field(10.0, gt=0.0, description=f"AI mean task lifetime in steps ({CHOSEN})")
    demand_eps: float = Field(1e-6, gt=0.0, description="demand below this is treated as vacuous")
    reward_form: Literal["weighted", "unweighted"] = Field(
        "weighted", description="'weighted' scales completion by priority; 'unweighted' drops it"
    )
    contention_basis: Literal["demand", "allocation"] = Field(
        "demand", description="current contention term from total demand or total allocation"
    )
    initial_allocation: tuple[float, float] = Field(
        (0.5, 0.5), description="(RAN, AI) allocation at episode start for learning policies"
    )

    @model_validator(mode="after")
    def _check_consistency(self) -> "EnvConfig":
        if self.p_ran < self.p_ai:
            raise ValueError("p_ran must be >= p_ai")
        if self.alpha_borrow is not None:
            if len(self.alpha_borrow) != self.horizon:
                raise ValueError(
                    f"alpha_borrow has {len(self.alpha_borrow)} entries, horizon is {self.horizon}"
                )
            if any(a < 0.0 or a > 1.0 for a in self.alpha_borrow):
                raise ValueError("alpha_borrow entries must lie in [0, 1]")
        if any(a < 0.0 or a > 1.0 for a in self.initial_allocation):
            raise ValueError("initial_allocation entries must lie in [0, 1]")
        if sum(self.initial_allocation) > 1.0 + 1e-12:
            raise ValueError("initial_allocation exceeds capacity")
        return self

    @property
    def mig_quantum(self) -> float:
        return 1.0 / self.r_max

    @property
    def borrow_coefficients(self) -> list[float]:
        if self.alpha_borrow is not None:
            return list(self.alpha_borrow)
        return [0.5 ** delta for delta in range(1, self.horizon + 1)]

    @property
    def priorities(self) -> tuple[float, float]:
        return (self.p_ran, self.p_ai)

    @property
    def state_dim(self) -> int:
        return 2 + 2 * self.horizon + 2


class SACConfig(BaseModel):
    model_config = {"extra": "forbid"}

    gamma: float = Field(0.99, gt=0.0, lt=1.0, description=f"discount factor ({PUBLISHED})")
    tau: float = Field(0.005, gt=0.0, le=1.0, description=f"target update rate ({PUBLISHED})")
    alpha: float = Field(0.2, ge=0.0, description=f"entropy temperature, fixed ({PUBLISHED})")
    actor_lr: float = Field(3e-4, ge=0.0, description=f"actor learning rate ({PUBLISHED})")
    critic_lr: float = Field(3e-4, ge=0.0, description=f"critic learning rate ({PUBLISHED})")
    buffer_capacity: int = Field(100_000, ge=1, description=f"replay buffer capacity ({PUBLISHED})")
    hidden: int = Field(128, ge=1, description=f"hidden units per MLP layer ({PUBLISHED})")
    batch: int = Field(64, ge=1, description=f"training mini-batch ({PUBLISHED})")
    action_dim: Literal[2] = Field(2, description="action is (delta r_RAN, delta r_AI)")
    entropy_in_target: bool = Field(True, description="include the entropy bonus in the critic target")
    warmup_steps: int = Field(1000, ge=0, description=f"uniform random actions before learning ({CONVENTIONAL})")
    updates_per_step: int = Field(1, ge=1, description=f"gradient updates per environment step ({CONVENTIONAL})")
    log_std_min: float = Field(-20.0, description="lower clamp of the actor log-std")
    log_std_max: float = Field(2.0, description="upper clamp of the actor log-std")
    final_layer_scale: float = Field(0.01, gt=0.0, description="init scale of the actor output layer")
    adam_betas: tuple[float, float] = Field((0.9, 0.999), description=f"Adam moments ({CONVENTIONAL})")
    adam_eps: float = Field(1e-8, gt=0.0, description=f"Adam epsilon ({CONVENTIONAL})")

    @model_validator(mode="after")
    def _check_log_std(self) -> "SACConfig":
        if self.log_std_min >= self.log_std_max:
            raise ValueError("log_std_min must be below log_std_max")
        return self


class ForecasterConfig(BaseModel):
    model_config = {"extra": "forbid"}

    seq_len: int = Field(10, ge=1, description=f"input window length ({PUBLISHED})")
    hidden1: int = Field(64, ge=1, description=f"first LSTM layer units ({PUBLISHED})")
    hidden2: int = Field(32, ge=1, description=f"second LSTM layer units ({PUBLISHED})")
    dropout: float = Field(0.2, ge=0.0, description=f"dropout between layers ({PUBLISHED})")
    epochs: int = Field(1000, ge=0, description=f"training epochs ({PUBLISHED})")
    batch: int = Field(256, ge=1, description=f"training batch size ({PUBLISHED})")
    lr: float = Field(1e-3, ge=0.0, description=f"Adam learning rate ({PUBLISHED})")
    adam_betas: tuple[float, float] = Field((0.9, 0.999), description=f"Adam moments ({CONVENTIONAL})")
    adam_eps: float = Field(1e-8, gt=0.0, description=f"Adam epsilon ({CONVENTIONAL})")
    lambda_detect: float = Field(1.0, ge=0.0, description=f"spike loss weight ({CHOSEN})")
    spike_percentile: float = Field(90.0, description=f"spike threshold percentile of the training split ({PUBLISHED})")
    norm_eps: float = Field(1e-8, gt=0.0, description=f"epsilon of the min-max demand normalization ({CHOSEN})")
    layer_norm_eps: float = Field(1e-8, gt=0.0, description="epsilon of the layer normalization")

    @field_validator("dropout")
    @classmethod
    def _check_dropout(cls, value: float) -> float:
        if value >= 1.0:
            raise ValueError("dropout rate must be < 1")
        return value

    @field_validator("spike_percentile")
    @classmethod
    def _check_percentile(cls, value: float) -> float:
        if not 0.0 < value < 100.0:
            raise ValueError("spike_percentile must lie in (0, 100)")
        return value


class RunConfig(BaseModel):
    model_config = {"extra": "forbid"}

    train_trace: Optional[str] = Field(None, description="training trace CSV; synthetic scenario when absent")
    test_trace: Optional[str] = Field(None, description="held-out day trace CSV; synthetic scenario when absent")
    scenario: Literal["event-spike", "diurnal", "flat"] = Field(
        "event-spike", description="synthetic scenario used when trace files are absent"
    )
    synthetic_train_steps: int = Field(1440, ge=2, description="length of the synthetic training trace")
    synthetic_test_steps: int = Field(144, ge=2, description="length of the synthetic held-out day")
    policy: Literal["sac", "balanced", "ran_priority", "all"] = Field("all", description="policy to evaluate")
    episodes: int = Field(1000, ge=1, description=f"training episodes ({PUBLISHED})")
    steps_per_episode: int = Field(100, ge=1, description=f"time steps per episode ({PUBLISHED})")
    eval_steps: Optional[int] = Field(None, ge=1, description="evaluation length; whole held-out profile when absent")
    seed: int = Field(0, ge=0, description="root seed for every random stream")
    forecaster_checkpoint: Optional[str] = Field(None, description="path of the trained forecaster")
    agent_checkpoint: Optional[str] = Field(None, description="path of the trained agent")
    output_dir: str = Field("runs", description="parent directory of per-run output folders")
    run_name: Optional[str] = Field(None, description="run folder name; derived from command, seed and config hash when absent")
    finetune_every: int = Field(0, ge=0, description="forecaster fine-tuning cadence in agent steps; 0 disables")
    parallel_eval: bool = Field(True, description="evaluate policies on separate threads")


class AppConfig(BaseModel):
    model_config = {"extra": "forbid"}

    env: EnvConfig = Field(default_factory=EnvConfig)
    sac: SACConfig = Field(default_factory=SACConfig)
    forecaster: ForecasterConfig = Field(default_factory=ForecasterConfig)
    run: RunConfig = Field(default_factory=RunConfig)

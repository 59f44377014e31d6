from pydantic import BaseModel, Field


class KpiMessage(BaseModel):
    """One radio-analytics record as exposed by the monitoring component, one per step."""

    model_config = {"extra": "forbid", "frozen": True}

    t: int = Field(..., ge=0)
    d_ran: float = Field(..., ge=0.0, le=1.0)
    d_ai: float = Field(..., ge=0.0, le=1.0)
    latency_proxy: float = Field(..., ge=1.0)
    load_proxy: float = Field(..., ge=0.0, le=1.0)

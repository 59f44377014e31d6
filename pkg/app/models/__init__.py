from .config import AppConfig, EnvConfig, SACConfig, ForecasterConfig, RunConfig, ConfigError
from .trace import TraceSeries, DemandProfile, Scaler, WindowedDataset
from .forecast import ForecastBundle, TrainingHistory, ForecastEvaluation
from .environment import OrchestratorState, StepTelemetry, TELEMETRY_COLUMNS
from .kpi import KpiMessage
from .report import EpisodeReport, ComparisonReport, EpisodeCurve, AgentTrainingResult

__all__ = [
    "AppConfig", "EnvConfig", "SACConfig", "ForecasterConfig", "RunConfig", "ConfigError",
    "TraceSeries", "DemandProfile", "Scaler", "WindowedDataset",
    "ForecastBundle", "TrainingHistory", "ForecastEvaluation",
    "OrchestratorState", "StepTelemetry", "TELEMETRY_COLUMNS",
    "KpiMessage",
    "EpisodeReport", "ComparisonReport", "EpisodeCurve", "AgentTrainingResult",
]

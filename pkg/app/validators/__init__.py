from .errors import ValidationError
from .trace_validator import validate_trace_frame
from .kpi_validator import validate_next_message
from .config_validator import validate_config

__all__ = ["ValidationError", "validate_trace_frame", "validate_next_message", "validate_config"]

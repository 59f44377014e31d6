"""
JSON-line event logging.

Every record is one JSON object: timestamp (ISO-8601 UTC), level, logger,
event, then the caller's fields. Loggers are named per area: access,
traces, forecaster, agent, orchestrator.
"""
import json
import logging
import sys
from datetime import datetime, timezone

import numpy as np


def configure_logging(level: str = "INFO") -> None:
    """Route every logger to stderr as bare JSON lines."""
    root = logging.getLogger()
    root.setLevel(level)
    if not any(getattr(h, "_json_lines", False) for h in root.handlers):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(message)s"))
        handler._json_lines = True
        root.addHandler(handler)


def log_event(logger: logging.Logger, event: str, level: int = logging.INFO, **fields) -> None:
    if not logger.isEnabledFor(level):
        return
    entry = {
        "timestamp": datetime.now(timezone.utc).isoformat(),
        "level": logging.getLevelName(level),
        "logger": logger.name,
        "event": event,
        **fields,
    }
    logger.log(level, json.dumps(entry, default=_jsonable))


def _jsonable(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return str(value)

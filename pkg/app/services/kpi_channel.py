"""
Simulated radio-analytics channel between the monitoring component and the
orchestrator.

Live mode turns a demand profile into one KpiMessage per step. Recording tees
a channel into a JSON-lines file (one message object per line, t first);
replay reads such a file back and rejects gaps and reordering.
"""
import logging
from pathlib import Path
from typing import Iterable, Iterator, Optional, Union

import pydantic

from app.models.kpi import KpiMessage
from app.models.trace import DemandProfile
from app.structured_log import log_event
from app.validators.errors import ValidationError
from app.validators.kpi_validator import validate_next_message

logger = logging.getLogger("orchestrator")

LATENCY_LOAD_CAP = 0.99

PathLike = Union[str, Path]


def kpi_message(t: int, d_ran: float, d_ai: float) -> KpiMessage:
    """Derive the load and latency indicators: load = (d_ran + d_ai)/2, latency = 1/(1 − 0.99·load)."""
    load = (d_ran + d_ai) / 2.0
    return KpiMessage(
        t=t,
        d_ran=d_ran,
        d_ai=d_ai,
        load_proxy=load,
        latency_proxy=1.0 / (1.0 - LATENCY_LOAD_CAP * load),
    )


def live_channel(profile: DemandProfile, start: int = 0, steps: Optional[int] = None) -> Iterator[KpiMessage]:
    """
    Messages for profile steps start, start+1, ..., numbered t = 0, 1, ...

    Stops at the end of the profile or after `steps` messages.
    """
    if not 0 <= start < len(profile):
        raise ValueError(f"start {start} outside a profile of length {len(profile)}")
    stop = len(profile) if steps is None else min(len(profile), start + steps)
    for t, index in enumerate(range(start, stop)):
        yield kpi_message(t, float(profile.d_ran[index]), float(profile.d_ai[index]))


def record_channel(channel: Iterable[KpiMessage], path: PathLike) -> Iterator[KpiMessage]:
    """Pass messages through unchanged while appending each one to `path`."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for message in channel:
            fh.write(message.model_dump_json() + "\n")
            fh.flush()
            count += 1
            yield message
    log_event(logger, "kpi_stream_recorded", path=str(path), messages=count)


def write_stream(channel: Iterable[KpiMessage], path: PathLike) -> int:
    """Drain a channel into a replay file; returns the message count."""
    return sum(1 for _ in record_channel(channel, path))


def replay_channel(path: PathLike) -> Iterator[KpiMessage]:
    """
    Read a recorded stream back in order.

    Raises:
        ValidationError: MISSING_FILE, UNPARSEABLE_ROW for a bad record, and
            OUT_OF_ORDER or SEQUENCE_GAP when steps do not follow 0, 1, 2, ...
    """
    path = Path(path)
    if not path.is_file():
        raise ValidationError(
            code="MISSING_FILE",
            message=f"KPI stream not found: {path}",
            details={"path": str(path)},
            http_status=404,
        )
    previous: Optional[int] = None
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                message = KpiMessage.model_validate_json(line)
            except pydantic.ValidationError as exc:
                raise ValidationError(
                    code="UNPARSEABLE_ROW",
                    message=f"{path}, line {line_number}: not a KPI record",
                    details={"path": str(path), "line": line_number, "errors": [err["msg"] for err in exc.errors()]},
                ) from exc
            validate_next_message(message, previous, str(path), line_number)
            previous = message.t
            yield message


def read_stream(path: PathLike) -> list[KpiMessage]:
    return list(replay_channel(path))

"""
Ordering rules for recorded KPI streams.
"""
from typing import Optional

from app.models.kpi import KpiMessage
from app.validators.errors import ValidationError


def validate_next_message(message: KpiMessage, previous_t: Optional[int], source: str, line: int) -> None:
    """
    Check that `message` directly follows the message with step `previous_t`.

    Raises:
        ValidationError: OUT_OF_ORDER when t does not increase, SEQUENCE_GAP when a
            step is skipped.
    """
    expected = 0 if previous_t is None else previous_t + 1
    if message.t == expected:
        return
    if previous_t is not None and message.t <= previous_t:
        raise ValidationError(
            code="OUT_OF_ORDER",
            message=f"{source}, line {line}: step {message.t} arrives after step {previous_t}",
            details={"source": source, "line": line, "t": message.t, "previous_t": previous_t},
        )
    raise ValidationError(
        code="SEQUENCE_GAP",
        message=f"{source}, line {line}: expected step {expected}, got {message.t}",
        details={"source": source, "line": line, "t": message.t, "expected_t": expected},
    )

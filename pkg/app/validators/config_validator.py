"""
Config document validation.

Translates pydantic's error list into a single ValidationError carrying every
offending key, so the CLI can report them together.
"""
from typing import Any

import pydantic

from app.models.config import AppConfig
from app.validators.errors import ValidationError


def validate_config(document: dict[str, Any]) -> AppConfig:
    """
    Build an AppConfig from a nested key-value document.

    Raises:
        ValidationError: UNKNOWN_KEY if any key is not a config field,
            otherwise INVALID_VALUE.
    """
    try:
        return AppConfig.model_validate(document)
    except pydantic.ValidationError as exc:
        problems = [
            {
                "key": ".".join(str(part) for part in err["loc"]),
                "type": err["type"],
                "message": err["msg"],
            }
            for err in exc.errors()
        ]
        unknown = [p["key"] for p in problems if p["type"] == "extra_forbidden"]
        if unknown:
            raise ValidationError(
                code="UNKNOWN_KEY",
                message=f"Unknown config key(s): {', '.join(unknown)}",
                details={"problems": problems},
            ) from exc
        raise ValidationError(
            code="INVALID_VALUE",
            message="; ".join(f"{p['key']}: {p['message']}" for p in problems),
            details={"problems": problems},
        ) from exc

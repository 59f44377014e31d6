import logging
import time

from starlette.middleware.base import BaseHTTPMiddleware
from starlette.requests import Request
from starlette.responses import Response

from app.structured_log import log_event

logger = logging.getLogger("access")


class StructuredLoggingMiddleware(BaseHTTPMiddleware):
    """One JSON access record per request. The API key value is never logged."""

    async def dispatch(self, request: Request, call_next) -> Response:
        start = time.monotonic()
        has_api_key = "X-API-Key" in request.headers

        response = await call_next(request)

        if response.status_code == 401:
            auth_outcome = "failed"
        elif has_api_key and response.status_code < 400:
            auth_outcome = "ok"
        else:
            auth_outcome = "present" if has_api_key else "missing"

        log_event(
            logger,
            "http_request",
            request_id=getattr(request.state, "request_id", None) or response.headers.get("X-Request-ID", "unknown"),
            method=request.method,
            path=request.url.path,
            status_code=response.status_code,
            ip=request.client.host if request.client else "unknown",
            duration_ms=round((time.monotonic() - start) * 1000),
            auth=auth_outcome,
        )
        return response

"""
FastAPI application entry point: a read-only API over run output folders.

Registers middleware (in order), routes, and exception handlers.
"""
from contextlib import asynccontextmanager
from pathlib import Path
from typing import Optional, Union

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.config import LOG_LEVEL, RUNS_DIR, get_api_key, get_cors_origins
from app.middleware import RequestIDMiddleware, SecurityHeadersMiddleware, StructuredLoggingMiddleware
from app.repository.run_store import RunStore
from app.routes.runs import router as runs_router
from app.structured_log import configure_logging


def create_app(runs_dir: Optional[Union[str, Path]] = None) -> FastAPI:
    @asynccontextmanager
    async def lifespan(app: FastAPI):
        configure_logging(LOG_LEVEL)
        get_api_key()
        yield

    application = FastAPI(
        title="AI-RAN Orchestration Runs",
        description="Manifests, comparison summaries, telemetry and KPI streams of simulation runs.",
        version="1.0.0",
        docs_url=None,
        redoc_url=None,
        lifespan=lifespan,
    )
    application.state.store = RunStore(runs_dir or RUNS_DIR)

    # ── Middleware stack (last added runs first) ────────────────────────────
    application.add_middleware(SecurityHeadersMiddleware)
    application.add_middleware(StructuredLoggingMiddleware)
    application.add_middleware(RequestIDMiddleware)
    application.add_middleware(
        CORSMiddleware,
        allow_origins=get_cors_origins(),
        allow_credentials=False,
        allow_methods=["GET"],
        allow_headers=["X-API-Key", "X-Request-ID"],
    )

    # ── Routes ──────────────────────────────────────────────────────────────
    application.include_router(runs_router)

    # ── Exception handlers ──────────────────────────────────────────────────
    @application.exception_handler(Exception)
    async def generic_exception_handler(request: Request, exc: Exception):
        return JSONResponse(
            status_code=500,
            content={"error": {"code": "INTERNAL_ERROR", "message": "An unexpected error occurred"}},
        )

    return application


app = create_app()

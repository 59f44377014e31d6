"""Run artifact endpoints — GET /api/v1/runs[/{run_id}[/telemetry/{policy} | /kpi | /curves]]"""
from datetime import datetime, timezone
from typing import Any

import pandas as pd
from fastapi import APIRouter, Depends, HTTPException, Query, Request, status

from app.engine.policies import PolicyKind
from app.repository.checkpoints import ArtifactNotFoundError
from app.repository.run_store import KPI_STREAM, MANIFEST, SUMMARY, InvalidRunIdError, RunStore, telemetry_name
from app.security.auth import require_api_key
from app.services.kpi_channel import replay_channel
from app.services.orchestrator_service import CURVES
from app.validators.errors import ValidationError

router = APIRouter(prefix="/api/v1/runs", tags=["runs"])

MAX_PAGE = 1000


def _envelope(data, request: Request, **extra) -> dict:
    return {
        "data": data,
        "meta": {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "request_id": getattr(request.state, "request_id", "unknown"),
            **extra,
        },
    }


def _store(request: Request) -> RunStore:
    return request.app.state.store


def _not_found(exc: ArtifactNotFoundError) -> HTTPException:
    # file names only; absolute server paths stay private
    name = exc.path.replace("\\", "/").rsplit("/", 1)[-1]
    return HTTPException(
        status_code=status.HTTP_404_NOT_FOUND,
        detail={"error": {"code": exc.code, "message": f"{name} not found", "details": {}}},
    )


def _bad_run_id(exc: InvalidRunIdError) -> HTTPException:
    return HTTPException(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        detail={"error": {"code": exc.code, "message": str(exc), "details": {}}},
    )


def _records(frame: pd.DataFrame) -> list[dict[str, Any]]:
    return frame.astype(object).where(frame.notna(), None).to_dict(orient="records")


def _page(frame: pd.DataFrame, offset: int, limit: int) -> pd.DataFrame:
    return frame.iloc[offset:offset + limit]


@router.get("")
def list_runs(request: Request, _: str = Depends(require_api_key)) -> dict:
    """Every run that has a manifest, with its command, seed and config hash."""
    runs = [
        {key: manifest.get(key) for key in ("run_id", "command", "seed", "config_hash", "created_at")}
        for manifest in _store(request).list_runs()
    ]
    return _envelope(runs, request, count=len(runs))


@router.get("/{run_id}")
def get_run(run_id: str, request: Request, _: str = Depends(require_api_key)) -> dict:
    """Manifest plus, for evaluation runs, the comparison summary."""
    store = _store(request)
    try:
        manifest = store.read_json(run_id, MANIFEST)
        try:
            summary = store.read_json(run_id, SUMMARY)
        except ArtifactNotFoundError:
            summary = None
    except ArtifactNotFoundError as exc:
        raise _not_found(exc)
    except InvalidRunIdError as exc:
        raise _bad_run_id(exc)
    return _envelope({"manifest": manifest, "summary": summary}, request)


@router.get("/{run_id}/telemetry/{policy}")
def get_telemetry(
    run_id: str,
    policy: PolicyKind,
    request: Request,
    offset: int = Query(0, ge=0),
    limit: int = Query(200, ge=1, le=MAX_PAGE),
    _: str = Depends(require_api_key),
) -> dict:
    """Per-step telemetry rows of one evaluated policy."""
    try:
        frame = _store(request).read_frame(run_id, telemetry_name(policy.value))
    except ArtifactNotFoundError as exc:
        raise _not_found(exc)
    except InvalidRunIdError as exc:
        raise _bad_run_id(exc)
    return _envelope(_records(_page(frame, offset, limit)), request, total=len(frame), offset=offset)


@router.get("/{run_id}/kpi")
def get_kpi_stream(
    run_id: str,
    request: Request,
    offset: int = Query(0, ge=0),
    limit: int = Query(200, ge=1, le=MAX_PAGE),
    _: str = Depends(require_api_key),
) -> dict:
    """The recorded KPI stream an evaluation replayed, validated on read."""
    try:
        path = _store(request).file_path(run_id, KPI_STREAM)
        messages = [m.model_dump() for m in replay_channel(path)]
    except ArtifactNotFoundError as exc:
        raise _not_found(exc)
    except InvalidRunIdError as exc:
        raise _bad_run_id(exc)
    except ValidationError as exc:
        raise HTTPException(
            status_code=exc.http_status,
            detail={"error": {"code": exc.code, "message": exc.message, "details": {}}},
        )
    return _envelope(messages[offset:offset + limit], request, total=len(messages), offset=offset)


@router.get("/{run_id}/curves")
def get_curves(run_id: str, request: Request, _: str = Depends(require_api_key)) -> dict:
    """Per-episode training curve of an agent-training run."""
    try:
        frame = _store(request).read_frame(run_id, CURVES)
    except ArtifactNotFoundError as exc:
        raise _not_found(exc)
    except InvalidRunIdError as exc:
        raise _bad_run_id(exc)
    return _envelope(_records(frame), request, total=len(frame))

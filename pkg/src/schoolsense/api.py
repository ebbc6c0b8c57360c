from __future__ import annotations

import logging
from contextlib import asynccontextmanager
from typing import Any

from fastapi import APIRouter, FastAPI, Header, HTTPException, Query, Request
from fastapi.responses import JSONResponse

from . import __version__
from .config import Settings
from .directory import Directory, DuplicateResource, UnknownResource, directory_from_settings
from .domain import Granularity, Reading, ResourceDescriptor, SchoolSenseError, parse_instant
from .engine import Engine
from .query import (
    FIELDS,
    Dispatcher,
    InvalidQuery,
    KeyTable,
    QueryRequest,
    QueryService,
    RangeTooLarge,
    UnknownSubscription,
    authorize,
    summary_row,
)
from .summaries import SummaryStore
from .topology import default_resource_id

logger = logging.getLogger(__name__)

router = APIRouter()


def bind(
    app: FastAPI, service: QueryService, dispatcher: Dispatcher, keys: KeyTable | None
) -> None:
    app.state.service = service
    app.state.dispatcher = dispatcher
    app.state.keys = keys
    if keys is None:
        logger.warning("api keys not configured; authorization disabled")


@asynccontextmanager
async def _lifespan(app: FastAPI):
    if not hasattr(app.state, "service"):
        settings = Settings.from_env()
        directory = directory_from_settings(settings)
        service = QueryService(
            directory, SummaryStore.at(settings.store_dir), settings.max_query_span_days
        )
        keys = KeyTable.from_yaml(settings.api_keys_path) if settings.api_keys_path else None
        bind(app, service, Dispatcher(directory, settings.subscriber_queue), keys)
    yield


def attach_engine(engine: Engine, dispatcher: Dispatcher, realtime_raw: bool = False) -> None:
    """Feed engine summary updates (and raw readings when enabled) to subscribers."""
    engine.add_listener(dispatcher.publish)
    if realtime_raw:
        engine.add_raw_listener(dispatcher.publish_raw)


def create_app(
    service: QueryService, dispatcher: Dispatcher, keys: KeyTable | None = None
) -> FastAPI:
    app = FastAPI(title="SchoolSense Data API", version=__version__)
    app.include_router(router)
    bind(app, service, dispatcher, keys)
    return app


def _check(request: Request, api_key: str | None, resource_ids: list[str]) -> None:
    keys: KeyTable | None = request.app.state.keys
    if keys is None:
        return
    if not api_key:
        raise HTTPException(status_code=401, detail="missing X-API-Key")
    if not authorize(keys, api_key, resource_ids):
        raise HTTPException(status_code=403, detail="forbidden")


def _error(status: int, exc: SchoolSenseError) -> HTTPException:
    return HTTPException(status_code=status, detail=f"{exc.code}: {exc}")


def _update_row(item: Any) -> dict[str, Any]:
    if isinstance(item, Reading):
        return {
            "resource_id": item.resource_id,
            "value": item.value,
            "timestamp": item.timestamp,
        }
    return summary_row(item)


def _descriptor_row(d: ResourceDescriptor) -> dict[str, Any]:
    return {
        "resource_id": d.resource_id,
        "device": d.device,
        "sensor": d.sensor,
        "kind": d.kind.value,
        "units": d.units,
        "reporting_period": d.reporting_period,
        "site_id": d.site_id,
        "room_id": d.room_id,
    }


async def _json_body(request: Request) -> dict[str, Any]:
    try:
        body = await request.json()
    except Exception:  # noqa: BLE001
        body = None
    if not isinstance(body, dict):
        raise HTTPException(status_code=400, detail="Invalid JSON body")
    return body


@router.get("/health")
def health(request: Request) -> dict[str, Any]:
    directory: Directory = request.app.state.service.directory
    return {"status": "ok", "resources": len(directory)}


@router.get("/directory")
def list_directory(
    request: Request,
    site_id: str | None = Query(None),
    x_api_key: str | None = Header(None),
) -> dict[str, Any]:
    _check(request, x_api_key, [])
    service: QueryService = request.app.state.service
    keys: KeyTable | None = request.app.state.keys
    items = [
        _descriptor_row(d)
        for d in service.list_resources(site_id)
        if keys is None or keys.authorize(x_api_key, [d.resource_id])
    ]
    return {"resources": items}


@router.post("/directory", status_code=201)
async def register_directory(
    request: Request, x_api_key: str | None = Header(None)
) -> dict[str, Any]:
    body = await _json_body(request)
    try:
        device, sensor = str(body["device"]), str(body["sensor"])
        descriptor = ResourceDescriptor(
            resource_id=str(body.get("resource_id") or default_resource_id(device, sensor)),
            device=device,
            sensor=sensor,
            kind=body.get("kind", "environmental"),
            units=str(body.get("units", "")),
            reporting_period=int(body.get("reporting_period", 30)),
            site_id=str(body.get("site_id", "")),
            room_id=body.get("room_id"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail=f"invalid resource: {exc}") from None
    _check(request, x_api_key, [descriptor.resource_id])
    service: QueryService = request.app.state.service
    try:
        resource_id = service.register_resource(descriptor)
    except DuplicateResource as exc:
        raise _error(409, exc) from None
    return {"resource_id": resource_id}


@router.get("/historical")
def historical(
    request: Request,
    resource: str = Query(...),
    granularity: str = Query("day"),
    t0: str = Query(..., alias="from"),
    t1: str = Query(..., alias="to"),
    fields: str | None = Query(None, description="comma-separated: avg,min,max,count,energy"),
    x_api_key: str | None = Header(None),
) -> dict[str, Any]:
    _check(request, x_api_key, [resource])
    service: QueryService = request.app.state.service
    try:
        q = QueryRequest(
            resource_id=resource,
            granularity=Granularity.from_label(granularity),
            t0=parse_instant(t0),
            t1=parse_instant(t1),
            fields=tuple(f for f in fields.split(",") if f) if fields else FIELDS,
        )
    except ValueError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from None
    try:
        result = service.historical(q)
    except UnknownResource as exc:
        raise _error(404, exc) from None
    except (InvalidQuery, RangeTooLarge) as exc:
        raise _error(400, exc) from None
    return {
        "resource_id": resource,
        "granularity": q.granularity.label,
        "latency_ms": result.latency_ms,
        "records": result.rows(),
    }


@router.post("/subscribe", status_code=201)
async def subscribe(request: Request, x_api_key: str | None = Header(None)) -> dict[str, Any]:
    body = await _json_body(request)
    dispatcher: Dispatcher = request.app.state.dispatcher
    wanted = body.get("resources")
    if wanted is not None and not isinstance(wanted, list):
        raise HTTPException(status_code=400, detail="resources must be a list or null")
    if wanted is None:
        scope = [d.resource_id for d in dispatcher.directory.list_resources()]
    else:
        scope = [str(r) for r in wanted]
    _check(request, x_api_key, scope)
    try:
        sub = dispatcher.subscribe(scope if wanted is not None else None)
    except UnknownResource as exc:
        raise _error(404, exc) from None
    return {"id": sub.sub_id}


@router.get("/subscribe/{sub_id}")
def drain_subscription(
    request: Request,
    sub_id: str,
    max_items: int = Query(500, ge=1, le=10000),
    timeout: float = Query(0.0, ge=0.0, le=30.0),
    x_api_key: str | None = Header(None),
) -> dict[str, Any]:
    _check(request, x_api_key, [])
    dispatcher: Dispatcher = request.app.state.dispatcher
    try:
        sub = dispatcher.get(sub_id)
    except UnknownSubscription as exc:
        raise _error(404, exc) from None
    updates = sub.poll(max_items=max_items, timeout=timeout)
    return {"id": sub_id, "updates": [_update_row(u) for u in updates], "dropped": sub.dropped}


@router.delete("/subscribe/{sub_id}")
def delete_subscription(
    request: Request, sub_id: str, x_api_key: str | None = Header(None)
) -> JSONResponse:
    _check(request, x_api_key, [])
    dispatcher: Dispatcher = request.app.state.dispatcher
    try:
        dispatcher.unsubscribe(sub_id)
    except UnknownSubscription as exc:
        raise _error(404, exc) from None
    return JSONResponse({"deleted": sub_id})


app = FastAPI(title="SchoolSense Data API", version=__version__, lifespan=_lifespan)
app.include_router(router)

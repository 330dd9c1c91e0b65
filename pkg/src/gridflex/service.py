"""HTTP interface over one installation.

All bodies carry a versioned `schema` field and RFC 3339 UTC timestamps.
Every response is a pure function of store state plus the request; GETs
never mutate anything. Error responses carry machine-readable `error`
codes plus the offending identifiers.
"""

from __future__ import annotations

import logging
import time
from datetime import datetime, timezone

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, ConfigDict, Field

from .config import SCHEMA, Installation
from .doms import Adjustment, DomsRunResult, MissingForecastsError, NotControllableError
from .flexibility import FlexRequest, FlexWindow, Violation
from .store import DataPoint, NotFoundError
from .timeutil import format_rfc3339, parse_rfc3339

log = logging.getLogger("gridflex.service")


# -- request bodies ----------------------------------------------------------


class _Body(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="ignore")
    schema_: str = Field(alias="schema", default=SCHEMA)


class ReadingRow(BaseModel):
    model_config = ConfigDict(extra="ignore")
    series: str
    timestamp: str
    value: float


class ReadingsBody(_Body):
    readings: list[ReadingRow]


class RunBody(_Body):
    issue_time: str
    p_threshold: float | None = None


class WhatIfBody(RunBody):
    # map series id -> list of (step, delta) pairs
    adjustments: dict[str, list[tuple[int, float]]] = Field(default_factory=dict)


# -- serializers -------------------------------------------------------------


def _violation_json(v: Violation) -> dict:
    return {
        "series": v.series,
        "step": v.step,
        "timestamp": format_rfc3339(v.timestamp) if v.timestamp else None,
        "bound": v.bound,
        "limit": v.limit,
        "predicted_mean": v.predicted_mean,
        "predicted_sd": v.predicted_sd,
        "exceedance_probability": v.exceedance_probability,
    }


def _request_json(q: FlexRequest) -> dict:
    return {
        "series": q.series,
        "step": q.step,
        "timestamp": format_rfc3339(q.timestamp) if q.timestamp else None,
        "amount": q.amount,
        "covering": [v.series for v in q.covering],
    }


def _window_json(w: FlexWindow) -> dict:
    return {
        "series": w.series,
        "start_step": w.start_step,
        "end_step": w.end_step,
        "start_time": format_rfc3339(w.start_time) if w.start_time else None,
        "end_time": format_rfc3339(w.end_time) if w.end_time else None,
        "amounts": list(w.amounts),
        "energy_kwh": w.energy,
        "n_steps": w.n_steps,
    }


def _run_json(result: DomsRunResult) -> dict:
    series_ids = sorted(result.steps[0].mean) if result.steps else []
    return {
        "schema": SCHEMA,
        "issue_time": format_rfc3339(result.issue_time),
        "p_threshold": result.p_threshold,
        "what_if": result.is_what_if,
        "adjustments": [
            {"series": a.series, "step": a.step, "delta": a.delta}
            for a in result.adjustments
        ],
        "step_times": [format_rfc3339(s.timestamp) for s in result.steps],
        "series": {
            sid: {
                "mean": [s.mean[sid] for s in result.steps],
                "sd": [s.sd[sid] for s in result.steps],
            }
            for sid in series_ids
        },
        "violations": [_violation_json(v) for v in result.violations],
        "flex_requests": [_request_json(q) for q in result.requests],
        "flex_windows": [_window_json(w) for w in result.windows],
        "warnings": list(result.warnings),
        "elapsed_s": result.elapsed_s,
    }


def _error(status: int, code: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"schema": SCHEMA, "error": code,
                                 "message": message, **extra})


# -- application -------------------------------------------------------------


def create_app(installation: Installation,
               static_dir=None) -> FastAPI:
    inst = installation
    app = FastAPI(title="gridflex", docs_url=None, redoc_url=None)

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        t0 = time.perf_counter()
        response = await call_next(request)
        log.info("%s %s -> %d (%.1f ms)", request.method,
                 request.url.path, response.status_code,
                 (time.perf_counter() - t0) * 1e3)
        return response

    class _BadRequest(Exception):
        def __init__(self, code, message, **extra):
            self.code, self.message, self.extra = code, message, extra

    @app.exception_handler(_BadRequest)
    async def bad_request_handler(request: Request, exc: _BadRequest):
        return _error(400, exc.code, exc.message, **exc.extra)

    def parse_time(raw: str, field: str):
        try:
            return parse_rfc3339(raw)
        except ValueError as exc:
            raise _BadRequest("invalid_timestamp",
                              f"{field}: {exc}", field=field) from exc

    # -- ingestion -----------------------------------------------------------

    @app.post("/api/readings")
    def post_readings(body: ReadingsBody):
        if body.schema_ != SCHEMA:
            return _error(400, "unsupported_schema",
                          f"expected {SCHEMA!r}", schema_given=body.schema_)
        by_series: dict[str, list[ReadingRow]] = {}
        for row in body.readings:
            by_series.setdefault(row.series, []).append(row)

        unknown = [s for s in by_series
                   if not inst.store.series_exists(s)]
        if unknown:
            return _error(404, "unknown_series",
                          "readings reference series that are not declared",
                          series=sorted(unknown))

        upserted = 0
        rejected = []
        for series in sorted(by_series):
            points = []
            for row in by_series[series]:
                try:
                    ts = parse_rfc3339(row.timestamp)
                except ValueError:
                    rejected.append({"series": series,
                                     "timestamp": row.timestamp,
                                     "reason": "unparseable timestamp"})
                    continue
                points.append(DataPoint(ts, row.value))
            report = inst.store.ingest(series, points)
            upserted += report.upserted
            rejected.extend(
                {"series": series, "timestamp": format_rfc3339(ts),
                 "reason": reason}
                for ts, reason in report.rejected)
        payload = {"schema": SCHEMA, "upserted": upserted, "rejected": rejected}
        return JSONResponse(status_code=207 if rejected else 200,
                            content=payload)

    @app.get("/api/readings/{series}")
    def get_readings(series: str, start: str = Query(...),
                     end: str = Query(...)):
        if not inst.store.series_exists(series):
            return _error(404, "unknown_series",
                          f"series {series!r} is not declared", series=series)
        t0 = parse_time(start, "start")
        t1 = parse_time(end, "end")
        try:
            points = inst.store.read_range(series, t0, t1)
        except ValueError as exc:
            return _error(400, "invalid_range", str(exc), series=series)
        return {
            "schema": SCHEMA,
            "series": series,
            "points": [{"timestamp": format_rfc3339(p.timestamp),
                        "value": p.value} for p in points],
        }

    # -- forecasts -----------------------------------------------------------

    @app.get("/api/forecasts/{series}")
    def get_forecast(series: str, as_of: str | None = Query(default=None)):
        cutoff = (parse_time(as_of, "as_of") if as_of
                  else datetime.now(tz=timezone.utc))
        try:
            record = inst.store.latest_forecast(series, as_of=cutoff)
        except NotFoundError:
            return _error(404, "no_forecast",
                          f"no forecast for {series!r} at or before "
                          f"{format_rfc3339(cutoff)}", series=series)
        return {
            "schema": SCHEMA,
            "series": record.series,
            "model_version": record.model_version,
            "issue_time": format_rfc3339(record.issue_time),
            "points": [{"timestamp": format_rfc3339(p.timestamp),
                        "value": p.value} for p in record.points],
        }

    # -- decision runs -------------------------------------------------------

    def run_response(issue_time: datetime, adjustments, p_threshold):
        try:
            result = inst.runner.run(issue_time, adjustments=adjustments,
                                     p_threshold=p_threshold)
        except MissingForecastsError as exc:
            return _error(409, "missing_forecasts", str(exc),
                          missing=list(exc.series))
        except NotControllableError as exc:
            return _error(400, "not_controllable", str(exc), series=exc.series)
        return _run_json(result)

    @app.post("/api/doms/run")
    def doms_run(body: RunBody):
        issue_time = parse_time(body.issue_time, "issue_time")
        return run_response(issue_time, (), body.p_threshold)

    @app.post("/api/doms/whatif")
    def doms_whatif(body: WhatIfBody):
        issue_time = parse_time(body.issue_time, "issue_time")
        adjustments = []
        for series, pairs in sorted(body.adjustments.items()):
            for step, delta in pairs:
                try:
                    adjustments.append(Adjustment(series, step, delta))
                except ValueError as exc:
                    return _error(400, "invalid_adjustment", str(exc),
                                  series=series, step=step)
        return run_response(issue_time, adjustments, body.p_threshold)

    # -- read-only views -----------------------------------------------------

    @app.get("/api/installation")
    def installation_info():
        return {
            "schema": SCHEMA,
            "name": inst.config.get("name", inst.directory.name),
            "counts": inst.registry.counts(),
            "model_configs": len(inst.engine.configs),
            "series": dict(sorted(inst.series_ids.items())),
            "controllables": list(inst.controllables),
            "p_threshold": inst.settings.p_threshold,
        }

    @app.get("/api/grid/topology")
    def grid_topology():
        topo = inst.topology
        if topo is None:
            return {"schema": SCHEMA, "nodes": [], "counts": {}}
        series_of = {}
        for key, sid in inst.series_ids.items():
            signal, entity = key.split("@", 1)
            series_of.setdefault(entity, {})[signal] = sid
        nodes = []
        for name in topo.substations:
            nodes.append({"name": name, "kind": "substation", "parent": None,
                          "series": series_of.get(name, {})})
        for name, parent in topo.feeders:
            nodes.append({"name": name, "kind": "feeder", "parent": parent,
                          "series": series_of.get(name, {})})
        for name, attached in topo.voltage_points:
            nodes.append({"name": name, "kind": "voltage_point",
                          "parent": attached,
                          "series": series_of.get(name, {})})
        return {
            "schema": SCHEMA,
            "nodes": nodes,
            "counts": {
                "substations": len(topo.substations),
                "feeders": len(topo.feeders),
                "voltage_points": len(topo.voltage_points),
            },
        }

    @app.get("/api/registry/counts")
    def registry_counts():
        return {"schema": SCHEMA, **inst.registry.counts()}

    @app.get("/api/registry/signals")
    def registry_signals():
        return {"schema": SCHEMA,
                "signals": [{"id": s.id, "name": s.name, "unit": s.unit}
                            for s in inst.registry.signals()]}

    @app.get("/api/registry/entities")
    def registry_entities(kind: str | None = None):
        return {"schema": SCHEMA,
                "entities": [
                    {"id": e.id, "name": e.name, "kind": e.kind,
                     "parent": e.parent}
                    for e in inst.registry.entities(kind)]}

    @app.get("/api/registry/series")
    def registry_series(signal: str | None = None, kind: str | None = None,
                        parent: str | None = None):
        rows = inst.registry.search_context(signal_fragment=signal,
                                            entity_kind=kind,
                                            parent_entity=parent)
        return {"schema": SCHEMA,
                "series": [
                    {"id": s.id,
                     "signal": s.signal.name,
                     "unit": s.signal.unit,
                     "entity": s.entity.name,
                     "entity_kind": s.entity.kind,
                     "resolution_s": s.resolution_s}
                    for s in rows]}

    @app.get("/api/jobs")
    def jobs(status: str | None = None, kind: str | None = None,
             limit: int = Query(default=500, ge=1, le=10_000)):
        rows = inst.job_log().list_jobs(status=status, kind=kind, limit=limit)
        return {"schema": SCHEMA,
                "jobs": [
                    {"id": j.id, "config_id": j.config_id, "kind": j.kind,
                     "due_time": format_rfc3339(j.due_time),
                     "status": j.status, "detail": j.detail,
                     "result_id": j.result_id}
                    for j in rows]}

    @app.get("/api/jobs/counts")
    def job_counts():
        return {"schema": SCHEMA, "counts": inst.job_log().counts()}

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="console")

    return app

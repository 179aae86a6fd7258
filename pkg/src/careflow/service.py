"""HTTP API over scenario sessions with file-backed persistence.

One JSON document per session, written atomically; mutations bump a revision
counter guarded by an optional expected-revision header. Read endpoints are
pure: they rebuild the twins from the stored document, answer, and discard
the ephemeral audit slice (only mutating calls extend the stored audit)."""

from __future__ import annotations

import datetime
import json
import threading
import uuid
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from fastapi import FastAPI, Header, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from .assets import asset_names, asset_text
from .errors import CareflowError, ParseError, StructuralError, TwinCallError
from .graph import CareGraph, load_graph, validate
from .guidelines import load_registry
from .necessity import CodeMap, load_code_map
from .orchestrator import Orchestrator, audit_export, entry_to_doc
from .patient import load_record, parse_event, record_to_doc
from .rules import World
from .scenario import (
    InjectEvent,
    SessionState,
    build_twins,
    default_as_of,
    execute_script,
    load_scenario,
    resolve_ref,
    to_doc,
)

EXPECTED_REVISION_HEADER = "X-Expected-Revision"

_STATUS_BY_CODE = {"not-found": 404, "validation": 400, "conflict": 409, "internal": 500}


class ApiException(Exception):
    """Carries the ApiError body: machine code, message, optional detail."""

    def __init__(self, code: str, message: str, detail: Any = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail

    def response(self) -> JSONResponse:
        body: dict = {"code": self.code, "message": self.message}
        if self.detail is not None:
            body["detail"] = self.detail
        return JSONResponse(status_code=_STATUS_BY_CODE[self.code], content=body)


class SessionStore:
    """One JSON file per session under a root directory; atomic writes."""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.lock = threading.Lock()

    def _path(self, session_id: str) -> Path:
        if not session_id.replace("-", "").isalnum():
            raise ApiException("validation", f"bad session id {session_id!r}")
        return self.root / f"{session_id}.json"

    def load(self, session_id: str) -> dict:
        path = self._path(session_id)
        if not path.exists():
            raise ApiException("not-found", f"no session {session_id!r}")
        return json.loads(path.read_text(encoding="utf-8"))

    def save(self, doc: dict) -> None:
        path = self._path(doc["id"])
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(json.dumps(doc, indent=2), encoding="utf-8")
        tmp.replace(path)

    def ids(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.json"))


class _Runtime:
    """A session's twins wired over its stored document."""

    def __init__(self, doc: dict):
        self.graph: CareGraph = load_graph(doc["graph"])
        self.registry = load_registry(doc["registry"])
        self.code_map: CodeMap = load_code_map(doc["code_map"])
        self.state = SessionState(load_record(doc["record"]))
        self.orchestrator = Orchestrator(
            clock=doc["clock"],
            message_seq=doc["messages"],
            correlation_seq=doc["correlations"],
        )
        build_twins(self.orchestrator, self.graph, self.registry, self.code_map, self.state)

    def ask(self, twin: str, function: str, payload: Any) -> Any:
        try:
            return self.orchestrator.call("console", twin, function, payload)
        except TwinCallError as exc:
            raise ApiException("validation", str(exc)) from None

    def audit_docs(self) -> list[dict]:
        return [entry_to_doc(e) for e in self.orchestrator.audit_log()]


def _raw_doc(ref, what: str) -> dict:
    resolved = resolve_ref(ref)
    if isinstance(resolved, str):
        try:
            resolved = json.loads(resolved)
        except json.JSONDecodeError as exc:
            raise ApiException("validation", f"{what} asset is not valid JSON: {exc.msg}")
    if not isinstance(resolved, dict):
        raise ApiException("validation", f"{what} asset must be an object")
    return resolved


def _parse_as_of(raw: Optional[str], record) -> datetime.date:
    if raw is None:
        return default_as_of(record)
    try:
        return datetime.date.fromisoformat(raw)
    except ValueError:
        raise ApiException("validation", f"bad as_of date {raw!r}") from None


def _parse_world(raw: Optional[str]) -> World:
    try:
        return World(raw) if raw else World.OPEN
    except ValueError:
        raise ApiException("validation", f"bad world {raw!r} (use open or closed)") from None


class CreateSessionBody(BaseModel):
    scenario: Any
    run_script: bool = False


class PostEventBody(BaseModel):
    event: dict


class SimulateBody(BaseModel):
    codes: list[str]
    world: Optional[str] = None
    as_of: Optional[str] = None
    overlay: list[dict] = []


def create_app(store_dir: Union[str, Path]) -> FastAPI:
    app = FastAPI(title="careflow", docs_url=None, redoc_url=None)
    # the browser console is served as a static page on another port
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SessionStore(store_dir)

    @app.exception_handler(ApiException)
    async def _api_error(_request, exc: ApiException):
        return exc.response()

    @app.exception_handler(Exception)
    async def _internal_error(_request, exc: Exception):
        return ApiException("internal", f"{type(exc).__name__}: {exc}").response()

    @app.get("/health")
    def health():
        return {"status": "ok", "sessions": len(store.ids())}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        scenario_doc = body.scenario
        if isinstance(scenario_doc, str):
            try:
                scenario_doc = json.loads(resolve_ref(scenario_doc))
            except (CareflowError, json.JSONDecodeError) as exc:
                raise ApiException("validation", f"cannot resolve scenario: {exc}") from None
        if not isinstance(scenario_doc, Mapping):
            raise ApiException("validation", "scenario must be a document or reference string")
        try:
            scenario = load_scenario(scenario_doc)
        except (ParseError, StructuralError, CareflowError) as exc:
            raise ApiException("validation", str(exc)) from None
        issues = validate(scenario.graph, scenario.registry)
        errors = [i for i in issues if i.severity == "error"]
        if errors:
            raise ApiException(
                "validation",
                "scenario assets failed validation",
                detail=[{"severity": i.severity, "location": i.location, "message": i.message} for i in errors],
            )
        doc = {
            "id": f"s-{uuid.uuid4().hex[:12]}",
            "revision": 0,
            "clock": 0,
            "messages": 0,
            "correlations": 0,
            "graph": _raw_doc(scenario_doc["graph"], "graph"),
            "registry": _raw_doc(scenario_doc["registry"], "registry"),
            "code_map": _raw_doc(scenario_doc["code_map"], "code_map"),
            "record": record_to_doc(scenario.record),
            "audit": [],
        }
        script_outputs = None
        if body.run_script and scenario.script:
            runtime = _Runtime(doc)
            script_outputs = execute_script(runtime.orchestrator, scenario.script, sender="console")
            doc["record"] = record_to_doc(runtime.state.record)
            doc["audit"] = runtime.audit_docs()
            doc["clock"] = runtime.orchestrator.clock
            doc["messages"] = runtime.orchestrator.message_seq
            doc["correlations"] = runtime.orchestrator.correlation_seq
            doc["revision"] = sum(1 for s in scenario.script if isinstance(s, InjectEvent))
        with store.lock:
            store.save(doc)
        response = {"id": doc["id"], "revision": doc["revision"]}
        if script_outputs is not None:
            response["script_outputs"] = script_outputs
        return response

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        doc = store.load(session_id)
        return {
            "id": doc["id"],
            "revision": doc["revision"],
            "graph_id": doc["graph"].get("id", ""),
            "clock": doc["clock"],
            "record": doc["record"],
        }

    @app.post("/sessions/{session_id}/events")
    def post_event(
        session_id: str,
        body: PostEventBody,
        expected_revision: Optional[str] = Header(default=None, alias=EXPECTED_REVISION_HEADER),
    ):
        with store.lock:
            doc = store.load(session_id)
            if expected_revision is not None and expected_revision != str(doc["revision"]):
                raise ApiException(
                    "conflict",
                    f"expected revision {expected_revision}, session is at {doc['revision']}",
                )
            try:
                event = parse_event(body.event)
            except ParseError as exc:
                raise ApiException("validation", str(exc)) from None
            runtime = _Runtime(doc)
            runtime.ask("history", "ingest_event", {"event": event})
            doc["record"] = record_to_doc(runtime.state.record)
            doc["audit"] = doc["audit"] + runtime.audit_docs()
            doc["clock"] = runtime.orchestrator.clock
            doc["messages"] = runtime.orchestrator.message_seq
            doc["correlations"] = runtime.orchestrator.correlation_seq
            doc["revision"] += 1
            store.save(doc)
            return {"id": doc["id"], "revision": doc["revision"]}

    @app.get("/sessions/{session_id}/recommendations")
    def get_recommendations(
        session_id: str,
        as_of: Optional[str] = Query(default=None),
        world: Optional[str] = Query(default=None),
    ):
        doc = store.load(session_id)
        runtime = _Runtime(doc)
        as_of_date = _parse_as_of(as_of, runtime.state.record)
        world_mode = _parse_world(world)
        recs = runtime.ask(
            "navigator", "recommend", {"as_of": as_of_date, "world": world_mode}
        )
        return {
            "session_id": session_id,
            "as_of": as_of_date.isoformat(),
            "world": world_mode.value,
            "recommendations": to_doc(recs),
            "audit": runtime.audit_docs(),
        }

    @app.get("/sessions/{session_id}/timeline")
    def get_timeline(session_id: str, as_of: Optional[str] = Query(default=None)):
        doc = store.load(session_id)
        runtime = _Runtime(doc)
        as_of_date = _parse_as_of(as_of, runtime.state.record)
        export = runtime.ask("history", "timeline", {"as_of": as_of_date})
        return {"session_id": session_id, "as_of": as_of_date.isoformat(), **export}

    @app.post("/sessions/{session_id}/necessity/simulate")
    def simulate_necessity(session_id: str, body: SimulateBody):
        doc = store.load(session_id)
        runtime = _Runtime(doc)
        as_of_date = _parse_as_of(body.as_of, runtime.state.record)
        world_mode = _parse_world(body.world)
        for entry in body.overlay:
            if not isinstance(entry.get("code"), str):
                raise ApiException("validation", f"overlay entry needs a code: {entry!r}")
        results = runtime.ask(
            "necessity",
            "simulate_batch",
            {
                "codes": body.codes,
                "as_of": as_of_date,
                "world": world_mode,
                "overlay": body.overlay,
            },
        )
        return {
            "session_id": session_id,
            "as_of": as_of_date.isoformat(),
            "world": world_mode.value,
            "determinations": to_doc(results),
            "audit": runtime.audit_docs(),
        }

    @app.get("/sessions/{session_id}/audit")
    def get_audit(session_id: str):
        doc = store.load(session_id)
        return PlainTextResponse(audit_export(doc["audit"]), media_type="application/x-ndjson")

    @app.get("/assets/graphs/{graph_id}")
    def get_graph_asset(graph_id: str):
        for name in asset_names():
            try:
                candidate = json.loads(asset_text(name))
            except (StructuralError, json.JSONDecodeError):
                continue
            if isinstance(candidate, dict) and "nodes" in candidate and candidate.get("id") == graph_id:
                return candidate
        raise ApiException("not-found", f"no bundled graph {graph_id!r}")

    return app

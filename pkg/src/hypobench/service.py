"""HTTP service over sessions, reports, and human-gate decisions.

Single-process, file-backed: session event logs live under
{data_dir}/sessions and replay into transcripts, so a restart loses nothing.
The event stream reads those log files directly (server-sent-events style),
so a slow consumer can never block a session's progress. Optional bearer-token
auth guards every route.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterator

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from . import config as cfg
from .gateway import LlmEndpoint, LlmGateway
from .orchestrator import (
    HumanDecision,
    NotAwaitingHuman,
    Orchestrator,
    SessionStore,
    UnknownSession,
    default_role_profiles,
)

TERMINAL_STATUSES = ("accepted", "exhausted", "failed")


@dataclass
class ServiceConfig:
    data_dir: Path
    endpoints: dict[str, LlmEndpoint]
    default_endpoint: str | None = None
    auth_token: str | None = None
    search_tool: Any = None
    trace_path: str | None = None
    static_dir: Path | None = None
    template_dir: Path | None = None
    gateway: LlmGateway | None = None

    @classmethod
    def from_config(cls, config: dict[str, Any], trace_path: str | None = None) -> "ServiceConfig":
        import os

        endpoints = cfg.build_endpoints(config)
        token = None
        token_env = config.get("auth_token_env")
        if token_env:
            token = os.environ.get(token_env) or None
        service = config.get("service") or {}
        static_dir = service.get("static_dir")
        return cls(
            data_dir=cfg.data_dir(config),
            endpoints=endpoints,
            default_endpoint=service.get("default_endpoint") or next(iter(endpoints), None),
            auth_token=token,
            search_tool=cfg.build_search_tool(config),
            trace_path=trace_path,
            static_dir=Path(static_dir) if static_dir else None,
            template_dir=cfg.template_dir(config),
        )


class StartSessionBody(BaseModel):
    background: str = Field(min_length=1)
    endpoint: str | None = None
    max_rounds: int = 3
    tool_use: str = "none"
    human_gate: str = "off"
    rng_seed: int = 0
    session_id: str | None = None


class DecisionBody(BaseModel):
    action: str
    text: str = ""


def create_app(service: ServiceConfig) -> FastAPI:
    service.data_dir.mkdir(parents=True, exist_ok=True)
    store = SessionStore(service.data_dir / "sessions")
    gateway = service.gateway or LlmGateway(trace_path=service.trace_path)
    orchestrator = Orchestrator(gateway=gateway, store=store, tool_executor=service.search_tool)
    meta_dir = service.data_dir / "sessions"
    reports_dir = service.data_dir / "reports"

    def check_auth(request: Request) -> None:
        if service.auth_token is None:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {service.auth_token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    app = FastAPI(title="hypobench", dependencies=[Depends(check_auth)])

    def endpoint_for(name: str | None) -> LlmEndpoint:
        name = name or service.default_endpoint
        if not name or name not in service.endpoints:
            raise HTTPException(status_code=400, detail=f"unknown endpoint {name!r}")
        return service.endpoints[name]

    def remember_endpoint(session_id: str, endpoint_name: str) -> None:
        (meta_dir / f"{session_id}.meta.json").write_text(
            json.dumps({"endpoint": endpoint_name}), encoding="utf-8"
        )

    def recall_endpoint(session_id: str) -> LlmEndpoint | None:
        meta_path = meta_dir / f"{session_id}.meta.json"
        if not meta_path.is_file():
            return None
        name = json.loads(meta_path.read_text(encoding="utf-8")).get("endpoint")
        return service.endpoints.get(name)

    def ensure_resumable(session_id: str) -> None:
        """Rehydrate a paused session from its log after a restart."""
        if session_id in orchestrator._engines:
            return
        endpoint = recall_endpoint(session_id)
        if endpoint is None:
            return
        try:
            orchestrator.rehydrate(
                session_id, default_role_profiles(endpoint, template_dir=service.template_dir)
            )
        except UnknownSession:
            pass

    @app.post("/sessions", status_code=202)
    def start_session(body: StartSessionBody) -> dict[str, str]:
        endpoint = endpoint_for(body.endpoint)
        try:
            session_config = cfg.build_session_config(body.model_dump())
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        roles = default_role_profiles(endpoint, template_dir=service.template_dir)
        session_id = body.session_id or f"session-{int(time.time() * 1000):x}-{threading.get_ident():x}"
        remember_endpoint(session_id, endpoint.name)

        def run() -> None:
            try:
                orchestrator.run_session(body.background, roles, session_config,
                                         session_id=session_id)
            except Exception:  # failures land in the event log as status=failed
                pass

        thread = threading.Thread(target=run, daemon=True, name=f"session-{session_id}")
        thread.start()
        return {"session_id": session_id}

    @app.get("/sessions")
    def list_sessions() -> list[dict[str, Any]]:
        out = []
        for session_id in orchestrator.session_ids():
            try:
                transcript = orchestrator.transcript(session_id)
            except UnknownSession:
                continue
            out.append({
                "session_id": session_id,
                "status": transcript.status,
                "background": transcript.background[:160],
                "turn_count": len(transcript.turns),
                "final_hypothesis": transcript.final_hypothesis,
            })
        return out

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict[str, Any]:
        try:
            return orchestrator.transcript(session_id).as_dict()
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    @app.get("/sessions/{session_id}/events")
    def stream_events(session_id: str) -> StreamingResponse:
        log_path = store.event_log_path(session_id)
        if log_path is None or not log_path.is_file():
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return StreamingResponse(_tail_events(log_path), media_type="text/event-stream")

    @app.post("/sessions/{session_id}/decision")
    def post_decision(session_id: str, body: DecisionBody) -> dict[str, Any]:
        try:
            decision = HumanDecision(kind=body.action, text=body.text)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        ensure_resumable(session_id)
        try:
            transcript = orchestrator.resume_with_decision(session_id, decision)
        except UnknownSession:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        except NotAwaitingHuman as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return transcript.as_dict()

    @app.get("/reports")
    def list_reports() -> list[str]:
        if not reports_dir.is_dir():
            return []
        return sorted(p.name for p in reports_dir.iterdir() if p.is_file())

    @app.get("/reports/{name}")
    def get_report(name: str):
        path = (reports_dir / name).resolve()
        if not path.is_file() or reports_dir.resolve() not in path.parents:
            raise HTTPException(status_code=404, detail=f"no report named {name}")
        media = "text/html" if path.suffix == ".html" else "text/csv"
        return FileResponse(path, media_type=media)

    @app.exception_handler(UnknownSession)
    def unknown_session_handler(_request: Request, exc: UnknownSession) -> JSONResponse:
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    if service.static_dir and service.static_dir.is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=service.static_dir, html=True), name="console")

    return app


def _tail_events(log_path: Path, poll_interval: float = 0.05,
                 idle_timeout: float = 30.0) -> Iterator[str]:
    """Yield SSE frames for each event line; follow the file until terminal status."""
    offset = 0
    idle = 0.0
    while True:
        events = []
        with log_path.open("rb") as fh:
            fh.seek(offset)
            while True:
                line = fh.readline()
                if not line or not line.endswith(b"\n"):  # partial append; retry next poll
                    break
                offset = fh.tell()
                if line.strip():
                    events.append(json.loads(line.decode("utf-8")))
        if events:
            idle = 0.0
            for event in events:
                yield f"event: {event.get('type', 'message')}\ndata: {json.dumps(event, ensure_ascii=False)}\n\n"
                if event.get("type") == "finished":
                    return
        else:
            time.sleep(poll_interval)
            idle += poll_interval
            if idle >= idle_timeout:
                yield "event: timeout\ndata: {}\n\n"
                return

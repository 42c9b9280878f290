"""Per-organization HTTP + server-sent-event gateway.

The gateway is a thin translation layer: requests become agent operations
executed on the runtime's scheduler thread, and every observable fact is read
from kernel/org state — the gateway holds no authoritative state of its own.
"""

from __future__ import annotations

import json
import queue
import threading
from typing import Optional

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .errors import SessionClosed
from .kernel import Node
from .org import spawn_operator

OPEN_TIMEOUT_S = 15.0
SETPOINT_TIMEOUT_S = 10.0


class OpenRequest(BaseModel):
    service_name: str


class SetpointRequest(BaseModel):
    var: str
    value: float


class _OperatorHandle:
    def __init__(self, ra):
        self.ra = ra
        self.events: "queue.Queue[dict]" = queue.Queue()

    def push(self, event: dict) -> None:
        self.events.put(event)


def create_app(node: Node, world) -> FastAPI:
    """Build the gateway app for one organization node.

    ``world`` must expose ``call(fn)`` running fn on the agent scheduler
    thread (LiveWorld does); all mutations go through it.
    """
    app = FastAPI(title=f"{node.org_name} operator gateway")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    operators: dict[str, _OperatorHandle] = {}
    app.state.node = node
    app.state.world = world
    app.state.operators = operators

    def _handle(ra_id: str) -> _OperatorHandle:
        handle = operators.get(ra_id)
        if handle is None:
            raise HTTPException(status_code=404, detail=f"unknown operator {ra_id!r}")
        return handle

    @app.post("/operators", status_code=201)
    def open_operator(body: OpenRequest):
        done = threading.Event()
        box: dict = {}

        def on_ready(session, error):
            box["session"] = session
            box["error"] = error
            done.set()

        def spawn_and_open():
            ra = spawn_operator(node)
            handle = _OperatorHandle(ra)
            operators[ra.aid.local_name] = handle
            ra.open(body.service_name, on_ready=on_ready, on_event=handle.push)
            return ra

        ra = world.call(spawn_and_open)
        if not done.wait(OPEN_TIMEOUT_S):
            raise HTTPException(status_code=504, detail="resolution timed out")
        if box["error"] is not None:
            operators.pop(ra.aid.local_name, None)
            world.call(lambda: node.destroy_agent(ra.aid))
            reason = box["error"]
            status = 504 if reason == "Timeout" else 404
            raise HTTPException(status_code=status, detail=reason)
        session = box["session"]
        return {
            "ra_id": ra.aid.local_name,
            "session": {
                "service_name": session.service.service_name,
                "provider": str(session.service.provider),
                "opened_at": session.opened_at,
            },
            "latency_record": session.latency.to_doc(),
        }

    @app.get("/services")
    def list_services(scope: str = "local"):
        if scope not in ("local", "reachable"):
            raise HTTPException(status_code=422, detail="scope must be local or reachable")

        def read():
            entries = [e.to_payload() for e in node.df.entries]
            if scope == "reachable":
                seen = {(e["service_name"], e["provider"]) for e in entries}
                for acq in node.gs.config.acquaintances:
                    peer = world.nodes.get(acq.org_name)
                    if peer is None:
                        continue  # remote peers are browsed via their own gateway
                    for e in peer.df.entries:
                        key = (e.service_name, str(e.provider))
                        if key not in seen:
                            seen.add(key)
                            entries.append(e.to_payload())
            return entries

        return world.call(read)

    @app.get("/operators/{ra_id}/events")
    def stream_events(ra_id: str):
        handle = _handle(ra_id)

        def generate():
            while True:
                try:
                    event = handle.events.get(timeout=30.0)
                except queue.Empty:
                    yield ": keep-alive\n\n"
                    continue
                yield f"data: {json.dumps(event, sort_keys=True)}\n\n"
                if event.get("type") == "session" and event.get("state") == "closed":
                    return

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.post("/operators/{ra_id}/setpoints")
    def send_setpoint(ra_id: str, body: SetpointRequest):
        handle = _handle(ra_id)
        done = threading.Event()
        box: dict = {}

        def on_verdict(ok: bool, reason: str):
            box["ok"] = ok
            box["reason"] = reason
            done.set()

        try:
            world.call(lambda: handle.ra.send_setpoint(body.var, body.value, on_verdict))
        except SessionClosed:
            raise HTTPException(status_code=409, detail="SessionClosed")
        if not done.wait(SETPOINT_TIMEOUT_S):
            raise HTTPException(status_code=504, detail="no verdict from provider")
        if not box["ok"]:
            raise HTTPException(status_code=422, detail=box["reason"])
        return {"accepted": True, "var": body.var, "value": body.value}

    @app.delete("/operators/{ra_id}", status_code=204)
    def close_operator(ra_id: str):
        handle = _handle(ra_id)
        world.call(handle.ra.close)

    @app.get("/topology")
    def topology():
        return world.call(node.gs.topology)

    return app

"""Networked command/telemetry service for live simulation steering.

JSON messages over a WebSocket endpoint (ws://host:port/control); schema in
docs/protocol.md. All state mutation funnels through the single simulation
stepping task, so no telemetry frame ever reflects a half-applied command.

Deliberately unauthenticated, like the bus it controls.
"""
from __future__ import annotations

import asyncio
import contextlib
import json
import time

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .scenario import Scenario
from .testbed import CommandError, Testbed

PROTOCOL_VERSION = 1
DEFAULT_PORT = 3090
TELEMETRY_HZ = 10.0
STEP_SECONDS = 0.02

COMMAND_VERBS = frozenset({
    "set_speed_override", "set_rpm_override", "set_airbag_disabled",
    "set_abs_disabled", "clear_overrides", "set_flood", "vehicle_set",
    "sim_pause", "sim_resume", "set_time_scale"})


def _error(seq, code: str, message: str) -> dict:
    return {"type": "reply", "seq": seq, "ok": False,
            "error": {"code": code, "message": message}}


def _ack(seq) -> dict:
    return {"type": "reply", "seq": seq, "ok": True}


class ControlPlane:
    """Command validation/dispatch plus telemetry assembly for one testbed."""

    def __init__(self, testbed: Testbed, time_scale: float = 1.0):
        self.testbed = testbed
        self.time_scale = time_scale
        self.paused = False

    def handle_command(self, text: str, last_seq: int | None = None) -> dict:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            return _error(None, "malformed", f"not valid JSON: {exc}")
        if not isinstance(doc, dict) or "verb" not in doc or "seq" not in doc:
            return _error(None, "malformed", "need object with seq and verb")
        seq, verb = doc["seq"], doc["verb"]
        if not isinstance(seq, int):
            return _error(None, "malformed", "seq must be an integer")
        if last_seq is not None and seq <= last_seq:
            return _error(seq, "bad_seq",
                          f"seq {seq} not greater than {last_seq}")
        if verb not in COMMAND_VERBS:
            return _error(seq, "unknown_verb", f"unknown verb {verb!r}")
        try:
            if verb == "sim_pause":
                self.paused = True
            elif verb == "sim_resume":
                self.paused = False
            elif verb == "set_time_scale":
                scale = doc.get("value")
                if not isinstance(scale, (int, float)) or scale <= 0:
                    return _error(seq, "out_of_range",
                                  "time scale must be positive")
                self.time_scale = float(scale)
            elif verb == "vehicle_set":
                self.testbed.apply_command(verb, {"field": doc.get("field"),
                                                  "value": doc.get("value")})
            else:
                self.testbed.apply_command(verb, {"value": doc.get("value")})
        except CommandError as exc:
            return _error(seq, exc.code, str(exc))
        return _ack(seq)

    def telemetry_frame(self) -> dict:
        frame = self.testbed.telemetry()
        frame["type"] = "telemetry"
        frame["protocol_version"] = PROTOCOL_VERSION
        frame["paused"] = self.paused
        frame["time_scale"] = self.time_scale
        return frame


def build_app(control: ControlPlane) -> FastAPI:
    clients: set[WebSocket] = set()

    async def broadcast(message: dict) -> None:
        text = json.dumps(message)
        for ws in list(clients):
            try:
                await ws.send_text(text)
            except Exception:
                clients.discard(ws)

    async def pacer() -> None:
        """Advance virtual time at time_scale x wall clock; 10 Hz telemetry."""
        last_wall = time.monotonic()
        last_telemetry = 0.0
        while True:
            await asyncio.sleep(STEP_SECONDS)
            wall = time.monotonic()
            dt, last_wall = wall - last_wall, wall
            if not control.paused:
                step_us = round(dt * control.time_scale * 1e6)
                control.testbed.run_until(control.testbed.now_us + step_us)
            if wall - last_telemetry >= 1.0 / TELEMETRY_HZ:
                last_telemetry = wall
                await broadcast(control.telemetry_frame())

    @contextlib.asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(pacer())
        try:
            yield
        finally:
            task.cancel()
            with contextlib.suppress(asyncio.CancelledError):
                await task

    app = FastAPI(title="canwire control plane", lifespan=lifespan)

    @app.websocket("/control")
    async def control_socket(ws: WebSocket):
        await ws.accept()
        clients.add(ws)
        # greet with an immediate telemetry frame so clients render at once
        await ws.send_text(json.dumps(control.telemetry_frame()))
        last_seq = None
        try:
            while True:
                text = await ws.receive_text()
                reply = control.handle_command(text, last_seq)
                if reply["ok"]:
                    last_seq = reply["seq"]
                await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            clients.discard(ws)

    return app


def serve(scenario: Scenario, host: str = "127.0.0.1",
          port: int = DEFAULT_PORT, time_scale: float = 1.0) -> None:
    """Run the paced simulation with the control endpoint until interrupted."""
    import uvicorn

    testbed = scenario.build()
    control = ControlPlane(testbed, time_scale=time_scale)
    app = build_app(control)
    config = uvicorn.Config(app, host=host, port=port, log_level="warning")
    server = uvicorn.Server(config)
    try:
        server.run()
    finally:
        snap = testbed.cluster.snapshot()
        print(f"final state at t={testbed.now_us / 1e6:.1f}s: "
              f"speed={snap.speed} rpm={snap.rpm} "
              f"lamps={[k for k, v in snap.lamps.items() if v] or 'none'}")

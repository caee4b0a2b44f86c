"""HTTP/WS operator API around a running simulation.

GET /state returns the latest tick snapshot; POST /command queues an
operator command for the next control tick and reports the outcome;
WS /stream pushes snapshot JSON at 10 Hz.
"""

from __future__ import annotations

import asyncio
import threading
from typing import Dict, List, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import RunConfig
from .runtime import Command, QueueCommands, Simulation, VALID_COMMANDS
from .trace import TRACE_COLUMNS

STREAM_PERIOD = 0.1  # s, 10 Hz


class CommandBody(BaseModel):
    type: str = Field(description=f"one of {', '.join(VALID_COMMANDS)}")
    args: Dict = Field(default_factory=dict)


class CommandReply(BaseModel):
    ok: bool
    message: str


class StateReply(BaseModel):
    t: float
    state: str
    alarms: List[str]
    done: bool
    record: Optional[Dict] = None


class JobServer:
    """Owns the simulation thread and the live command queue."""

    def __init__(self, cfg: RunConfig, modbus_port: Optional[int] = None):
        self.cfg = cfg
        self.queue = QueueCommands()
        self.sim = Simulation(cfg, modbus_port=modbus_port)
        self._thread: Optional[threading.Thread] = None

    def start(self, max_time: float = 1e9) -> None:
        self._thread = threading.Thread(
            target=self.sim.run, args=(self.queue,), kwargs={"max_time": max_time}, daemon=True
        )
        self._thread.start()

    def stop(self) -> None:
        if self._thread is not None and self._thread.is_alive():
            self.queue.submit_nowait(Command("stop"))
            self._thread.join(timeout=5.0)
        self.sim.close()

    def state(self) -> StateReply:
        snap = self.sim.snapshot()
        record = None
        if snap.record is not None:
            record = {c: getattr(snap.record, c) for c in TRACE_COLUMNS}
        return StateReply(
            t=snap.t, state=snap.state, alarms=list(snap.alarms), done=snap.done, record=record
        )


def create_app(job: JobServer) -> FastAPI:
    app = FastAPI(title="tape laying cell", version="0.1.0")

    @app.get("/state", response_model=StateReply)
    def get_state() -> StateReply:
        return job.state()

    @app.post("/command", response_model=CommandReply)
    def post_command(body: CommandBody):
        if body.type not in VALID_COMMANDS:
            return JSONResponse(
                status_code=400,
                content={"ok": False, "message": f"unknown command type {body.type!r}"},
            )
        result = job.queue.submit(Command(body.type, dict(body.args)))
        if not result.ok:
            # interlock and validation refusals are structured, not errors
            return CommandReply(ok=False, message=result.message)
        return CommandReply(ok=True, message=result.message)

    @app.websocket("/stream")
    async def stream(ws: WebSocket):
        await ws.accept()
        try:
            while True:
                reply = job.state()
                await ws.send_text(reply.model_dump_json())
                await asyncio.sleep(STREAM_PERIOD)
        except (WebSocketDisconnect, RuntimeError):
            return

    return app
